#pragma once

#include <stdexcept>
#include <string>

namespace evf {

// A caller broke a documented precondition.
struct ContractError : std::logic_error {
  using std::logic_error::logic_error;
};

// Tensor shape / dimension mismatch.
struct ShapeError : ContractError {
  using ContractError::ContractError;
};

// Malformed file contents. Carries the 1-based line number when known.
struct ParseError : std::runtime_error {
  int line = 0;
  ParseError(const std::string& path, int line_no, const std::string& what)
      : std::runtime_error(path + ":" + std::to_string(line_no) + ": " + what),
        line(line_no) {}
  explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

// Training aborted (non-finite loss, incompatible checkpoint, ...).
struct TrainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace evf
