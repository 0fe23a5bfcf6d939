#pragma once

#include <cmath>
#include <vector>

#include "evf/errors.hpp"

namespace evf {

// Central-difference gradient estimate: (f(theta + h e_i) - f(theta - h e_i)) / 2h
// per coordinate. f takes the parameter vector and returns the scalar as double.
// Independent of the autodiff path; used as the gradient oracle everywhere.
template <typename T, typename F>
std::vector<double> finite_diff_gradient(F&& f, std::vector<T> theta, double h) {
  if (!(h > 0)) throw ContractError("finite_diff_gradient: h must be positive");
  std::vector<double> grad(theta.size());
  for (size_t i = 0; i < theta.size(); ++i) {
    const T saved = theta[i];
    theta[i] = static_cast<T>(static_cast<double>(saved) + h);
    const double fp = f(theta);
    theta[i] = static_cast<T>(static_cast<double>(saved) - h);
    const double fm = f(theta);
    theta[i] = saved;
    grad[i] = (fp - fm) / (2.0 * h);
  }
  return grad;
}

// |a-b| relative to the larger magnitude, with a floor so that agreement on
// near-zero gradients is judged absolutely at floor * tolerance.
inline double gradient_rel_error(double a, double b, double floor) {
  const double denom = std::max({std::abs(a), std::abs(b), floor});
  return std::abs(a - b) / denom;
}

}  // namespace evf
