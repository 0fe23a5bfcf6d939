#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "evf/errors.hpp"

namespace evf {

inline std::string shape_str(const std::vector<int>& shape) {
  std::ostringstream os;
  os << "{";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ",";
    os << shape[i];
  }
  os << "}";
  return os.str();
}

namespace detail {

// std::allocator that default-initializes instead of value-initializing when
// elements are constructed without arguments, so vector(n) leaves trivially
// constructible element memory unwritten. Tensor::uninit relies on this to
// skip the zero-fill for buffers whose every element is overwritten next.
template <typename T>
struct DefaultInitAllocator : std::allocator<T> {
  template <typename U>
  struct rebind {
    using other = DefaultInitAllocator<U>;
  };
  using std::allocator<T>::allocator;
  template <typename U, typename... Args>
  void construct(U* p, Args&&... args) {
    if constexpr (sizeof...(Args) == 0)
      ::new (static_cast<void*>(p)) U;
    else
      ::new (static_cast<void*>(p)) U(std::forward<Args>(args)...);
  }
};

}  // namespace detail

// Dense row-major tensor. Rank 1 ({n}) and rank 2 ({rows,cols}) cover
// everything this project needs; scalars are {1}.
template <typename T>
struct Tensor {
  using Storage = std::vector<T, detail::DefaultInitAllocator<T>>;

  std::vector<int> shape;
  Storage data;

  Tensor() = default;
  Tensor(std::vector<int> s, Storage d) : shape(std::move(s)), data(std::move(d)) {
    if (static_cast<size_t>(numel_of(shape)) != data.size())
      throw ShapeError("tensor data length " + std::to_string(data.size()) +
                       " does not match shape " + shape_str(shape));
  }

  static int64_t numel_of(const std::vector<int>& s) {
    int64_t n = 1;
    for (int e : s) {
      if (e < 0) throw ShapeError("negative extent in shape " + shape_str(s));
      n *= e;
    }
    return n;
  }

  static Tensor zeros(std::vector<int> s) {
    auto n = numel_of(s);
    return Tensor(std::move(s), Storage(static_cast<size_t>(n), T(0)));
  }
  // Allocates without initializing. Only for buffers whose every element is
  // written before any read; zeros() remains the default for accumulators.
  static Tensor uninit(std::vector<int> s) {
    auto n = numel_of(s);
    return Tensor(std::move(s), Storage(static_cast<size_t>(n)));
  }
  static Tensor full(std::vector<int> s, T v) {
    auto n = numel_of(s);
    return Tensor(std::move(s), Storage(static_cast<size_t>(n), v));
  }
  static Tensor scalar(T v) { return Tensor({1}, {v}); }
  static Tensor row_vector(Storage v) {
    int n = static_cast<int>(v.size());
    return Tensor({n}, std::move(v));
  }
  static Tensor matrix(int r, int c, Storage v) { return Tensor({r, c}, std::move(v)); }

  int numel() const { return static_cast<int>(data.size()); }
  int ndim() const { return static_cast<int>(shape.size()); }

  int rows() const {
    if (ndim() != 2) throw ShapeError("rows() on non-matrix " + shape_str(shape));
    return shape[0];
  }
  int cols() const {
    if (ndim() != 2) throw ShapeError("cols() on non-matrix " + shape_str(shape));
    return shape[1];
  }
  // Row count when the tensor is read as a set of rows of its last extent.
  int row_count() const { return ndim() == 2 ? shape[0] : 1; }
  int last_dim() const {
    if (shape.empty()) throw ShapeError("last_dim() on rank-0 tensor");
    return shape.back();
  }

  T& at(int i) { return data[static_cast<size_t>(i)]; }
  const T& at(int i) const { return data[static_cast<size_t>(i)]; }
  T& at(int i, int j) { return data[static_cast<size_t>(i) * cols() + j]; }
  const T& at(int i, int j) const { return data[static_cast<size_t>(i) * cols() + j]; }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  T item() const {
    if (numel() != 1) throw ShapeError("item() on tensor of shape " + shape_str(shape));
    return data[0];
  }
};

template <typename T>
using EigenRowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<EigenRowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const EigenRowMat<T>>;

namespace detail {

template <typename T>
ConstMatMap<T> as_matrix(const Tensor<T>& t, int r, int c) {
  return ConstMatMap<T>(t.data.data(), r, c);
}
template <typename T>
MatMap<T> as_matrix(Tensor<T>& t, int r, int c) {
  return MatMap<T>(t.data.data(), r, c);
}

}  // namespace detail

// c (+)= a . b for row-major buffers.
template <typename T>
void gemm(const Tensor<T>& a, const Tensor<T>& b, Tensor<T>& c, bool accumulate) {
  const int m = a.rows(), k = a.cols(), n = b.cols();
  auto am = detail::as_matrix(a, m, k);
  auto bm = detail::as_matrix(b, k, n);
  auto cm = detail::as_matrix(c, m, n);
  if (accumulate)
    cm.noalias() += am * bm;
  else
    cm.noalias() = am * bm;
}

// c (+)= a . b^T
template <typename T>
void gemm_nt(const Tensor<T>& a, const Tensor<T>& b, Tensor<T>& c, bool accumulate) {
  const int m = a.rows(), k = a.cols(), n = b.rows();
  auto am = detail::as_matrix(a, m, k);
  auto bm = detail::as_matrix(b, n, k);
  auto cm = detail::as_matrix(c, m, n);
  if (accumulate)
    cm.noalias() += am * bm.transpose();
  else
    cm.noalias() = am * bm.transpose();
}

// c (+)= a^T . b
template <typename T>
void gemm_tn(const Tensor<T>& a, const Tensor<T>& b, Tensor<T>& c, bool accumulate) {
  const int m = a.cols(), k = a.rows(), n = b.cols();
  auto am = detail::as_matrix(a, k, m);
  auto bm = detail::as_matrix(b, k, n);
  auto cm = detail::as_matrix(c, m, n);
  if (accumulate)
    cm.noalias() += am.transpose() * bm;
  else
    cm.noalias() = am.transpose() * bm;
}

// Standard matrix product with shape checking.
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.ndim() != 2 || b.ndim() != 2)
    throw ShapeError("matmul expects matrices, got " + shape_str(a.shape) + " x " +
                     shape_str(b.shape));
  if (a.cols() != b.rows())
    throw ShapeError("matmul inner extents differ: " + shape_str(a.shape) + " x " +
                     shape_str(b.shape));
  Tensor<T> c = Tensor<T>::uninit({a.rows(), b.cols()});
  gemm(a, b, c, false);
  return c;
}

template <typename T>
double max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
  if (!a.same_shape(b))
    throw ShapeError("max_abs_diff shapes differ: " + shape_str(a.shape) + " vs " +
                     shape_str(b.shape));
  double m = 0;
  for (int i = 0; i < a.numel(); ++i)
    m = std::max(m, std::abs(static_cast<double>(a.data[i]) - static_cast<double>(b.data[i])));
  return m;
}

template <typename T>
double max_abs(const Tensor<T>& a) {
  double m = 0;
  for (T v : a.data) m = std::max(m, std::abs(static_cast<double>(v)));
  return m;
}

template <typename T>
bool all_finite(const Tensor<T>& a) {
  return std::all_of(a.data.begin(), a.data.end(), [](T v) { return std::isfinite(v); });
}

}  // namespace evf
