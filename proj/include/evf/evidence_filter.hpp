#pragma once

#include <algorithm>
#include <array>
#include <optional>
#include <vector>

#include "evf/autodiff.hpp"
#include "evf/tensor.hpp"

namespace evf {

// 4x4 filter with alpha on the diagonal and beta off-diagonal.
template <typename T>
Tensor<T> build_filter(T alpha, T beta) {
  Tensor<T> a = Tensor<T>::full({4, 4}, beta);
  for (int i = 0; i < 4; ++i) a.at(i, i) = alpha;
  return a;
}

// A . H where A mixes the four per-option rows of H.
template <typename T>
Tensor<T> apply_filter(const Tensor<T>& a, const Tensor<T>& h) {
  if (a.ndim() != 2 || a.rows() != 4 || a.cols() != 4)
    throw ShapeError("apply_filter: filter must be 4x4, got " + shape_str(a.shape));
  if (h.ndim() != 2 || h.rows() != 4)
    throw ShapeError("apply_filter: representation must be 4xd, got " + shape_str(h.shape));
  return matmul(a, h);
}

// Permutation of {0,1,2,3} as a 4x4 row-exchange matrix: R[i][perm[i]] = 1,
// so (R.H)[i] = H[perm[i]].
template <typename T>
Tensor<T> permutation_matrix(const std::array<int, 4>& perm) {
  std::array<bool, 4> seen{};
  for (int p : perm) {
    if (p < 0 || p >= 4 || seen[static_cast<size_t>(p)])
      throw ContractError("permutation_matrix: input is not a bijection on {0..3}");
    seen[static_cast<size_t>(p)] = true;
  }
  Tensor<T> r = Tensor<T>::zeros({4, 4});
  for (int i = 0; i < 4; ++i) r.at(i, perm[static_cast<size_t>(i)]) = T(1);
  return r;
}

inline std::array<std::array<int, 4>, 24> all_permutations_of_4() {
  std::array<std::array<int, 4>, 24> out{};
  std::array<int, 4> p = {0, 1, 2, 3};
  int idx = 0;
  do {
    out[static_cast<size_t>(idx++)] = p;
  } while (std::next_permutation(p.begin(), p.end()));
  return out;
}

// max |(A.R - R.A)[i][j]|. Zero exactly when the filter commutes with the
// row exchange.
template <typename T>
double check_commutation(const Tensor<T>& a, const Tensor<T>& r) {
  return max_abs_diff(matmul(a, r), matmul(r, a));
}

// Residual of the closed form (A.R)[i][j] = (alpha-beta) R[i][j] + beta that
// holds when A has the constrained structure.
template <typename T>
double constrained_product_residual(T alpha, T beta, const Tensor<T>& r) {
  const Tensor<T> prod = matmul(build_filter(alpha, beta), r);
  double worst = 0;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      const double expect =
          (static_cast<double>(alpha) - static_cast<double>(beta)) * static_cast<double>(r.at(i, j)) +
          static_cast<double>(beta);
      worst = std::max(worst, std::abs(static_cast<double>(prod.at(i, j)) - expect));
    }
  return worst;
}

// LayerNorm(H + A.H) on the tape, row-wise (Eq. of the filtered block).
// Without a filter the residual term alone is normalized: LayerNorm(H).
template <typename T>
Var filter_block_tape(Tape<T>& tape, Var h, std::optional<Var> filter, Var ln_gain, Var ln_bias) {
  Var pre = filter ? tape.add(h, tape.matmul(*filter, h)) : h;
  return tape.layer_norm(pre, ln_gain, ln_bias);
}

// Plain-tensor version used by audits and tests.
template <typename T>
Tensor<T> filter_block(const Tensor<T>& h, const std::optional<Tensor<T>>& filter,
                       const Tensor<T>& ln_gain, const Tensor<T>& ln_bias) {
  Tape<T> tape;
  std::optional<Var> f;
  if (filter) f = tape.input(*filter);
  Var out = filter_block_tape(tape, tape.input(h), f, tape.input(ln_gain), tape.input(ln_bias));
  return tape.val(out);
}

// Applies perm to the rows of a matrix: out[i] = m[perm[i]].
template <typename T>
Tensor<T> permute_rows(const Tensor<T>& m, const std::array<int, 4>& perm) {
  if (m.ndim() != 2 || m.rows() != 4)
    throw ShapeError("permute_rows expects 4xd, got " + shape_str(m.shape));
  Tensor<T> out = Tensor<T>::zeros(m.shape);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < m.cols(); ++j) out.at(i, j) = m.at(perm[static_cast<size_t>(i)], j);
  return out;
}

}  // namespace evf
