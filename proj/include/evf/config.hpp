#pragma once

#include <string>

#include "evf/train.hpp"

namespace evf {

// JSON round-trips for the run configuration. Unknown keys are rejected so a
// typo in a config file fails loudly instead of silently using a default.
std::string config_to_json(const TrainConfig& cfg);
TrainConfig config_from_json(const std::string& text);

// Reads a config file from disk; throws ParseError with the path on failure.
TrainConfig load_config_file(const std::string& path);

}  // namespace evf
