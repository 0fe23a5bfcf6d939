#pragma once

#include <string>
#include <vector>

#include "evf/errors.hpp"
#include "evf/rng.hpp"
#include "evf/tensor.hpp"

namespace evf {

// One named trainable tensor with its gradient accumulator.
template <typename T>
struct Param {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;
};

// Ordered registry of trainable parameters. Registration order is part of
// the checkpoint and optimizer-state contract, so it must be deterministic.
template <typename T>
class ParamStore {
 public:
  int add(std::string name, Tensor<T> init) {
    int id = static_cast<int>(params_.size());
    Param<T> p;
    p.name = std::move(name);
    p.grad = Tensor<T>::zeros(init.shape);
    p.value = std::move(init);
    params_.push_back(std::move(p));
    return id;
  }

  int size() const { return static_cast<int>(params_.size()); }
  Param<T>& operator[](int id) { return params_[static_cast<size_t>(id)]; }
  const Param<T>& operator[](int id) const { return params_[static_cast<size_t>(id)]; }

  int find(const std::string& name) const {
    for (int i = 0; i < size(); ++i)
      if (params_[static_cast<size_t>(i)].name == name) return i;
    return -1;
  }

  void zero_grads() {
    for (auto& p : params_) std::fill(p.grad.data.begin(), p.grad.data.end(), T(0));
  }

  int total_values() const {
    int n = 0;
    for (const auto& p : params_) n += p.value.numel();
    return n;
  }

  std::vector<T> flatten_values() const {
    std::vector<T> out;
    out.reserve(static_cast<size_t>(total_values()));
    for (const auto& p : params_) out.insert(out.end(), p.value.data.begin(), p.value.data.end());
    return out;
  }

  void unflatten_values(const std::vector<T>& flat) {
    if (static_cast<int>(flat.size()) != total_values())
      throw ContractError("unflatten_values: expected " + std::to_string(total_values()) +
                          " values, got " + std::to_string(flat.size()));
    size_t off = 0;
    for (auto& p : params_) {
      std::copy(flat.begin() + off, flat.begin() + off + p.value.data.size(),
                p.value.data.begin());
      off += p.value.data.size();
    }
  }

  std::vector<T> flatten_grads() const {
    std::vector<T> out;
    out.reserve(static_cast<size_t>(total_values()));
    for (const auto& p : params_) out.insert(out.end(), p.grad.data.begin(), p.grad.data.end());
    return out;
  }

 private:
  std::vector<Param<T>> params_;
};

// Normal(0, std) initializer.
template <typename T>
Tensor<T> normal_init(std::vector<int> shape, double stddev, Rng& rng) {
  Tensor<T> t = Tensor<T>::zeros(std::move(shape));
  for (auto& v : t.data) v = static_cast<T>(rng.normal() * stddev);
  return t;
}

}  // namespace evf
