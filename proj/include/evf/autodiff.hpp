#pragma once

#include <cmath>
#include <functional>
#include <span>
#include <unordered_map>
#include <vector>

#include "evf/params.hpp"
#include "evf/tensor.hpp"

namespace evf {

// Handle to a node on a Tape. Only valid for the tape that produced it.
struct Var {
  int id = -1;
};

// Reverse-mode autodiff tape. Nodes are appended in evaluation order, which
// is also a topological order, so backward() is a single reverse sweep.
// A tape is single-writer; independent tapes never share state.
template <typename T>
class Tape {
 public:
  static constexpr T kLayerNormEps = T(1e-5);

  // A training-step tape for the benchmark model runs to a few hundred
  // nodes; reserving up front avoids rebuilding the node array as it grows.
  Tape() { nodes_.reserve(256); }

  // Skip gradient allocation at node creation. For tapes that only run a
  // forward pass (prediction, evaluation); backward() still works on such a
  // tape because gradients materialize as zeros on first access.
  void disable_grads() { grads_enabled_ = false; }

  // ---- leaves ----

  Var input(Tensor<T> v) { return push(std::move(v), nullptr, -1); }

  Var constant(T v) { return input(Tensor<T>::scalar(v)); }

  // Leaf bound to a trainable parameter. Memoized: every use of the same
  // parameter on this tape shares one node, so its gradient accumulates.
  Var param(const ParamStore<T>& store, int param_id) {
    auto it = param_vars_.find(param_id);
    if (it != param_vars_.end()) return it->second;
    Var v = push(store[param_id].value, nullptr, param_id);
    param_vars_.emplace(param_id, v);
    return v;
  }

  // ---- elementwise / linear ----

  Var add(Var a, Var b) {
    check_same_shape(a, b, "add");
    const auto& av = val(a);
    const auto& bv = val(b);
    Tensor<T> out = Tensor<T>::uninit(av.shape);
    for (int i = 0; i < out.numel(); ++i) out.data[i] = av.data[i] + bv.data[i];
    return push(std::move(out), [a, b](Tape& t, int self) {
      const auto& g = t.grad_at(self);
      t.accumulate(a, g);
      t.accumulate(b, g);
    });
  }

  Var mul(Var a, Var b) {
    check_same_shape(a, b, "mul");
    const auto& av = val(a);
    const auto& bv = val(b);
    Tensor<T> out = Tensor<T>::uninit(av.shape);
    for (int i = 0; i < out.numel(); ++i) out.data[i] = av.data[i] * bv.data[i];
    return push(std::move(out), [a, b](Tape& t, int self) {
      const auto& g = t.grad_at(self);
      auto& ga = t.grad_at(a);
      auto& gb = t.grad_at(b);
      const auto& av = t.val(a);
      const auto& bv2 = t.val(b);
      for (int i = 0; i < g.numel(); ++i) {
        ga.data[i] += g.data[i] * bv2.data[i];
        gb.data[i] += g.data[i] * av.data[i];
      }
    });
  }

  Var scale(Var a, T c) {
    const auto& av = val(a);
    Tensor<T> out = Tensor<T>::uninit(av.shape);
    for (int i = 0; i < out.numel(); ++i) out.data[i] = av.data[i] * c;
    return push(std::move(out), [a, c](Tape& t, int self) {
      const auto& g = t.grad_at(self);
      auto& ga = t.grad_at(a);
      for (int i = 0; i < g.numel(); ++i) ga.data[i] += c * g.data[i];
    });
  }

  // m: {n,c} plus bias broadcast over rows; bias: {c}.
  Var add_bias_row(Var m, Var bias) {
    const auto& mv = val(m);
    const auto& bv = val(bias);
    if (mv.last_dim() != bv.numel())
      throw ShapeError("add_bias_row: " + shape_str(mv.shape) + " + " + shape_str(bv.shape));
    Tensor<T> out = Tensor<T>::uninit(mv.shape);
    const int n = mv.row_count(), c = mv.last_dim();
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < c; ++j)
        out.data[static_cast<size_t>(i) * c + j] = mv.data[static_cast<size_t>(i) * c + j] + bv.data[j];
    return push(std::move(out), [m, bias, n, c](Tape& t, int self) {
      const auto& g = t.grad_at(self);
      t.accumulate(m, g);
      auto& gb = t.grad_at(bias);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < c; ++j) gb.data[j] += g.data[static_cast<size_t>(i) * c + j];
    });
  }

  Var sum(Var a) {
    const auto& av = val(a);
    T s = 0;
    for (T v : av.data) s += v;
    return push(Tensor<T>::scalar(s), [a](Tape& t, int self) {
      const T g = t.grad_at(self).data[0];
      auto& ga = t.grad_at(a);
      for (auto& v : ga.data) v += g;
    });
  }

  // ---- matrix products ----

  Var matmul(Var a, Var b) {
    const auto& av = val(a);
    const auto& bv = val(b);
    if (av.ndim() != 2 || bv.ndim() != 2 || av.cols() != bv.rows())
      throw ShapeError("matmul inner extents differ: " + shape_str(av.shape) + " x " +
                       shape_str(bv.shape));
    Tensor<T> out = Tensor<T>::uninit({av.rows(), bv.cols()});
    gemm(av, bv, out, false);
    return push(std::move(out), [a, b](Tape& t, int self) {
      const auto& g = t.grad_at(self);
      gemm_nt(g, t.val(b), t.grad_at(a), true);  // dA += dC . B^T
      gemm_tn(t.val(a), g, t.grad_at(b), true);  // dB += A^T . dC
    });
  }

  // C = A . B^T
  Var matmul_nt(Var a, Var b) {
    const auto& av = val(a);
    const auto& bv = val(b);
    if (av.ndim() != 2 || bv.ndim() != 2 || av.cols() != bv.cols())
      throw ShapeError("matmul_nt extents differ: " + shape_str(av.shape) + " x " +
                       shape_str(bv.shape) + "^T");
    Tensor<T> out = Tensor<T>::uninit({av.rows(), bv.rows()});
    gemm_nt(av, bv, out, false);
    return push(std::move(out), [a, b](Tape& t, int self) {
      const auto& g = t.grad_at(self);
      gemm(g, t.val(b), t.grad_at(a), true);     // dA += dC . B
      gemm_tn(g, t.val(a), t.grad_at(b), true);  // dB += dC^T . A
    });
  }

  // ---- slicing / assembly ----

  // Contiguous column slice [j0, j0+w) of a matrix.
  Var cols(Var a, int j0, int w) {
    const auto& av = val(a);
    const int n = av.rows(), c = av.cols();
    if (j0 < 0 || w <= 0 || j0 + w > c)
      throw ShapeError("cols [" + std::to_string(j0) + "," + std::to_string(j0 + w) +
                       ") out of range for " + shape_str(av.shape));
    Tensor<T> out = Tensor<T>::uninit({n, w});
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < w; ++j) out.at(i, j) = av.at(i, j0 + j);
    // Capture stays within std::function's inline buffer; the row count is
    // recovered from the gradient's shape.
    return push(std::move(out), [a, j0, w](Tape& t, int self) {
      const auto& g = t.grad_at(self);
      auto& ga = t.grad_at(a);
      const int rows = g.rows();
      for (int i = 0; i < rows; ++i)
        for (int j = 0; j < w; ++j) ga.at(i, j0 + j) += g.at(i, j);
    });
  }

  Var concat_cols(const std::vector<Var>& parts) {
    if (parts.empty()) throw ContractError("concat_cols: empty input");
    const int n = val(parts[0]).rows();
    int total = 0;
    for (Var p : parts) {
      if (val(p).rows() != n)
        throw ShapeError("concat_cols: row mismatch " + shape_str(val(p).shape));
      total += val(p).cols();
    }
    Tensor<T> out = Tensor<T>::uninit({n, total});
    int off = 0;
    for (Var p : parts) {
      const auto& pv = val(p);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < pv.cols(); ++j) out.at(i, off + j) = pv.at(i, j);
      off += pv.cols();
    }
    return push(std::move(out), [parts, n](Tape& t, int self) {
      const auto& g = t.grad_at(self);
      int off2 = 0;
      for (Var p : parts) {
        auto& gp = t.grad_at(p);
        const int w = t.val(p).cols();
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < w; ++j) gp.at(i, j) += g.at(i, off2 + j);
        off2 += w;
      }
    });
  }

  // Row gather: out[i] = table[ids[i]]. Embedding lookup.
  Var gather_rows(Var table, std::vector<int> ids) {
    const auto& tv = val(table);
    const int v = tv.rows(), d = tv.cols();
    for (int id : ids)
      if (id < 0 || id >= v)
        throw ContractError("gather_rows: index " + std::to_string(id) +
                            " out of range for table " + shape_str(tv.shape));
    const int n = static_cast<int>(ids.size());
    Tensor<T> out = Tensor<T>::uninit({n, d});
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < d; ++j) out.at(i, j) = tv.at(ids[static_cast<size_t>(i)], j);
    return push(std::move(out), [table, ids = std::move(ids), d](Tape& t, int self) {
      const auto& g = t.grad_at(self);
      auto& gt = t.grad_at(table);
      for (size_t i = 0; i < ids.size(); ++i)
        for (int j = 0; j < d; ++j) gt.at(ids[i], j) += g.at(static_cast<int>(i), j);
    });
  }

  // Single row of a matrix as a {d} vector.
  Var row(Var a, int i) {
    const auto& av = val(a);
    const int n = av.rows(), d = av.cols();
    if (i < 0 || i >= n)
      throw ContractError("row " + std::to_string(i) + " out of range for " +
                          shape_str(av.shape));
    Tensor<T> out = Tensor<T>::uninit({d});
    for (int j = 0; j < d; ++j) out.data[j] = av.at(i, j);
    return push(std::move(out), [a, i, d](Tape& t, int self) {
      const auto& g = t.grad_at(self);
      auto& ga = t.grad_at(a);
      for (int j = 0; j < d; ++j) ga.at(i, j) += g.data[j];
    });
  }

  // Mean over rows of a matrix -> {d}.
  Var mean_rows(Var a) {
    const auto& av = val(a);
    const int n = av.rows(), d = av.cols();
    Tensor<T> out = Tensor<T>::zeros({d});
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < d; ++j) out.data[j] += av.at(i, j);
    for (int j = 0; j < d; ++j) out.data[j] /= static_cast<T>(n);
    return push(std::move(out), [a, n, d](Tape& t, int self) {
      const auto& g = t.grad_at(self);
      auto& ga = t.grad_at(a);
      const T inv = T(1) / static_cast<T>(n);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) ga.at(i, j) += g.data[j] * inv;
    });
  }

  // Stack {d} vectors into an {n,d} matrix.
  Var stack_rows(const std::vector<Var>& rows_in) {
    if (rows_in.empty()) throw ContractError("stack_rows: empty input");
    const int d = val(rows_in[0]).numel();
    const int n = static_cast<int>(rows_in.size());
    Tensor<T> out = Tensor<T>::uninit({n, d});
    for (int i = 0; i < n; ++i) {
      const auto& rv = val(rows_in[static_cast<size_t>(i)]);
      if (rv.numel() != d) throw ShapeError("stack_rows: width mismatch");
      for (int j = 0; j < d; ++j) out.at(i, j) = rv.data[j];
    }
    return push(std::move(out), [rows_in, d](Tape& t, int self) {
      const auto& g = t.grad_at(self);
      for (size_t i = 0; i < rows_in.size(); ++i) {
        auto& gr = t.grad_at(rows_in[i]);
        for (int j = 0; j < d; ++j) gr.data[j] += g.at(static_cast<int>(i), j);
      }
    });
  }

  // ---- normalization / activations / loss ----

  // Row-wise layer normalization with learnable gain and bias ({d} each).
  // Accepts {n,d} matrices or a single {d} vector.
  Var layer_norm(Var x, Var gain, Var bias, T eps = kLayerNormEps) {
    const auto& xv = val(x);
    const int d = xv.last_dim(), n = xv.row_count();
    if (d < 2) throw ContractError("layer_norm needs width >= 2, got " + shape_str(xv.shape));
    if (eps <= T(0)) throw ContractError("layer_norm eps must be positive");
    const auto& gv = val(gain);
    const auto& bv = val(bias);
    if (gv.numel() != d || bv.numel() != d)
      throw ShapeError("layer_norm gain/bias width mismatch: x " + shape_str(xv.shape) +
                       ", gain " + shape_str(gv.shape) + ", bias " + shape_str(bv.shape));

    Tensor<T> out = Tensor<T>::uninit(xv.shape);
    Tensor<T> xhat = Tensor<T>::uninit(xv.shape);  // normalized rows, saved for backward
    Tensor<T> inv_std = Tensor<T>::uninit({n});
    for (int i = 0; i < n; ++i) {
      const T* xr = xv.data.data() + static_cast<size_t>(i) * d;
      T mean = 0;
      for (int j = 0; j < d; ++j) mean += xr[j];
      mean /= static_cast<T>(d);
      T var = 0;
      for (int j = 0; j < d; ++j) {
        T c = xr[j] - mean;
        var += c * c;
      }
      var /= static_cast<T>(d);
      const T istd = T(1) / std::sqrt(var + eps);
      inv_std.data[i] = istd;
      T* hr = xhat.data.data() + static_cast<size_t>(i) * d;
      T* orow = out.data.data() + static_cast<size_t>(i) * d;
      for (int j = 0; j < d; ++j) {
        hr[j] = (xr[j] - mean) * istd;
        orow[j] = hr[j] * gv.data[j] + bv.data[j];
      }
    }
    return push(std::move(out), [x, gain, bias, xhat = std::move(xhat),
                                 inv_std = std::move(inv_std), n, d](Tape& t, int self) {
      const auto& g = t.grad_at(self);
      auto& gx = t.grad_at(x);
      auto& gg = t.grad_at(gain);
      auto& gb = t.grad_at(bias);
      const auto& gv2 = t.val(gain);
      for (int i = 0; i < n; ++i) {
        const T* grow = g.data.data() + static_cast<size_t>(i) * d;
        const T* hrow = xhat.data.data() + static_cast<size_t>(i) * d;
        T* gxr = gx.data.data() + static_cast<size_t>(i) * d;
        T su = 0, suh = 0;
        for (int j = 0; j < d; ++j) {
          const T u = grow[j] * gv2.data[j];
          su += u;
          suh += u * hrow[j];
          gg.data[j] += grow[j] * hrow[j];
          gb.data[j] += grow[j];
        }
        const T istd = inv_std.data[i];
        const T inv_d = T(1) / static_cast<T>(d);
        for (int j = 0; j < d; ++j) {
          const T u = grow[j] * gv2.data[j];
          gxr[j] += istd * (u - su * inv_d - hrow[j] * suh * inv_d);
        }
      }
    });
  }

  // Gaussian error linear unit, exact erf form.
  Var gelu(Var a) {
    const auto& av = val(a);
    Tensor<T> out = Tensor<T>::uninit(av.shape);
    for (int i = 0; i < out.numel(); ++i) {
      const double xd = static_cast<double>(av.data[i]);
      out.data[i] = static_cast<T>(0.5 * xd * (1.0 + std::erf(xd * 0.7071067811865475244)));
    }
    return push(std::move(out), [a](Tape& t, int self) {
      const auto& g = t.grad_at(self);
      auto& ga = t.grad_at(a);
      const auto& av2 = t.val(a);
      for (int i = 0; i < g.numel(); ++i) {
        const double xd = static_cast<double>(av2.data[i]);
        const double cdf = 0.5 * (1.0 + std::erf(xd * 0.7071067811865475244));
        const double pdf = 0.3989422804014326779 * std::exp(-0.5 * xd * xd);
        ga.data[i] += g.data[i] * static_cast<T>(cdf + xd * pdf);
      }
    });
  }

  // Row-wise softmax, max-subtracted for stability.
  Var softmax_rows(Var a) {
    const auto& av = val(a);
    const int n = av.row_count(), d = av.last_dim();
    Tensor<T> out = Tensor<T>::uninit(av.shape);
    for (int i = 0; i < n; ++i) {
      const T* xr = av.data.data() + static_cast<size_t>(i) * d;
      T* orow = out.data.data() + static_cast<size_t>(i) * d;
      T mx = xr[0];
      for (int j = 1; j < d; ++j) mx = std::max(mx, xr[j]);
      T z = 0;
      for (int j = 0; j < d; ++j) {
        orow[j] = std::exp(xr[j] - mx);
        z += orow[j];
      }
      const T inv = T(1) / z;
      for (int j = 0; j < d; ++j) orow[j] *= inv;
    }
    return push(std::move(out), [a, n, d](Tape& t, int self) {
      const auto& g = t.grad_at(self);
      const auto& y = t.node_value(self);
      auto& ga = t.grad_at(a);
      for (int i = 0; i < n; ++i) {
        const T* gr = g.data.data() + static_cast<size_t>(i) * d;
        const T* yr = y.data.data() + static_cast<size_t>(i) * d;
        T* gar = ga.data.data() + static_cast<size_t>(i) * d;
        T dot = 0;
        for (int j = 0; j < d; ++j) dot += gr[j] * yr[j];
        for (int j = 0; j < d; ++j) gar[j] += yr[j] * (gr[j] - dot);
      }
    });
  }

  // -log softmax(logits)[label], with max subtraction.
  Var softmax_cross_entropy(Var logits, int label) {
    const auto& lv = val(logits);
    const int n = lv.numel();
    if (lv.ndim() != 1) throw ShapeError("softmax_cross_entropy expects a vector of logits");
    if (label < 0 || label >= n)
      throw ContractError("softmax_cross_entropy: label " + std::to_string(label) +
                          " out of range [0," + std::to_string(n) + ")");
    T mx = lv.data[0];
    for (int j = 1; j < n; ++j) mx = std::max(mx, lv.data[j]);
    T z = 0;
    Tensor<T> probs = Tensor<T>::uninit({n});
    for (int j = 0; j < n; ++j) {
      probs.data[j] = std::exp(lv.data[j] - mx);
      z += probs.data[j];
    }
    const T inv = T(1) / z;
    for (int j = 0; j < n; ++j) probs.data[j] *= inv;
    const T loss = std::log(z) - (lv.data[label] - mx);
    return push(Tensor<T>::scalar(loss),
                [logits, label, probs = std::move(probs), n](Tape& t, int self) {
                  const T g = t.grad_at(self).data[0];
                  auto& gl = t.grad_at(logits);
                  for (int j = 0; j < n; ++j)
                    gl.data[j] += g * (probs.data[j] - (j == label ? T(1) : T(0)));
                });
  }

  // ---- model-specific fused ops ----

  // 4x4 matrix with alpha on the diagonal and beta everywhere else, built
  // from two scalar nodes so gradient updates stay on that manifold.
  Var filter_from_scalars(Var alpha, Var beta) {
    const T a = val(alpha).item();
    const T b = val(beta).item();
    Tensor<T> out = Tensor<T>::full({4, 4}, b);
    for (int i = 0; i < 4; ++i) out.at(i, i) = a;
    return push(std::move(out), [alpha, beta](Tape& t, int self) {
      const auto& g = t.grad_at(self);
      T da = 0, db = 0;
      for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) (i == j ? da : db) += g.at(i, j);
      t.grad_at(alpha).data[0] += da;
      t.grad_at(beta).data[0] += db;
    });
  }

  // M = sum_k w[k] * xs[k] + b, with scalar b broadcast elementwise.
  Var weighted_sum(const std::vector<Var>& xs, Var w, Var b) {
    const int k = static_cast<int>(xs.size());
    if (k == 0) throw ContractError("weighted_sum: empty stack");
    const auto& wv = val(w);
    if (wv.numel() != k)
      throw ShapeError("weighted_sum: " + std::to_string(k) + " blocks but weight vector " +
                       shape_str(wv.shape));
    const auto& x0 = val(xs[0]);
    Tensor<T> out = Tensor<T>::full(x0.shape, val(b).item());
    for (int i = 0; i < k; ++i) {
      const auto& xv = val(xs[static_cast<size_t>(i)]);
      if (!xv.same_shape(x0)) throw ShapeError("weighted_sum: block shape mismatch");
      const T wi = wv.data[i];
      for (int j = 0; j < out.numel(); ++j) out.data[j] += wi * xv.data[j];
    }
    return push(std::move(out), [xs, w, b, k](Tape& t, int self) {
      const auto& g = t.grad_at(self);
      auto& gw = t.grad_at(w);
      auto& gb = t.grad_at(b);
      T gsum = 0;
      for (int j = 0; j < g.numel(); ++j) gsum += g.data[j];
      gb.data[0] += gsum;
      const auto& wv2 = t.val(w);
      for (int i = 0; i < k; ++i) {
        auto& gx = t.grad_at(xs[static_cast<size_t>(i)]);
        const auto& xv = t.val(xs[static_cast<size_t>(i)]);
        T dw = 0;
        for (int j = 0; j < g.numel(); ++j) {
          gx.data[j] += wv2.data[i] * g.data[j];
          dw += g.data[j] * xv.data[j];
        }
        gw.data[i] += dw;
      }
    });
  }

  // y[i] = m[i] . w + b for every row of m. Scoring head.
  Var linear_rows(Var m, Var w, Var b) {
    const auto& mv = val(m);
    const auto& wv = val(w);
    const int n = mv.rows(), d = mv.cols();
    if (wv.numel() != d)
      throw ShapeError("linear_rows: " + shape_str(mv.shape) + " . " + shape_str(wv.shape));
    const T bias = val(b).item();
    Tensor<T> out = Tensor<T>::uninit({n});
    for (int i = 0; i < n; ++i) {
      T s = bias;
      for (int j = 0; j < d; ++j) s += mv.at(i, j) * wv.data[j];
      out.data[i] = s;
    }
    return push(std::move(out), [m, w, b](Tape& t, int self) {
      const auto& g = t.grad_at(self);
      auto& gm = t.grad_at(m);
      auto& gw = t.grad_at(w);
      auto& gb = t.grad_at(b);
      const auto& mv2 = t.val(m);
      const auto& wv2 = t.val(w);
      const int rows = mv2.rows(), depth = mv2.cols();
      for (int i = 0; i < rows; ++i) {
        const T gi = g.data[i];
        gb.data[0] += gi;
        for (int j = 0; j < depth; ++j) {
          gm.at(i, j) += gi * wv2.data[j];
          gw.data[j] += gi * mv2.at(i, j);
        }
      }
    });
  }

  // ---- access / backward ----

  const Tensor<T>& val(Var v) const { return nodes_[static_cast<size_t>(v.id)].value; }
  const Tensor<T>& grad(Var v) const { return const_cast<Tape*>(this)->grad_at(v); }

  // Reverse sweep from a scalar seed. Gradients of nodes the seed does not
  // depend on stay at zero.
  void backward(Var seed) {
    if (seed.id < 0 || seed.id >= static_cast<int>(nodes_.size()))
      throw ContractError("backward: invalid seed node");
    if (nodes_[static_cast<size_t>(seed.id)].value.numel() != 1)
      throw ContractError("backward: seed must be scalar, got shape " +
                          shape_str(nodes_[static_cast<size_t>(seed.id)].value.shape));
    grad_at(seed).data[0] = T(1);
    for (int i = seed.id; i >= 0; --i) {
      auto& n = nodes_[static_cast<size_t>(i)];
      if (n.backward) n.backward(*this, i);
    }
  }

  // Add this tape's parameter-leaf gradients into the store's accumulators.
  void accumulate_param_grads(ParamStore<T>& store) const {
    for (const auto& [pid, var] : param_vars_) {
      auto& dst = store[pid].grad;
      const auto& src = grad(var);
      for (int i = 0; i < dst.numel(); ++i) dst.data[i] += src.data[i];
    }
  }

  int size() const { return static_cast<int>(nodes_.size()); }

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;  // empty until first accessed, then zeros shaped like value
    std::function<void(Tape&, int)> backward;
    int param_id = -1;
  };

  // Gradients materialize on first access so forward-only tapes (prediction,
  // evaluation) never allocate them. Accumulation order is unchanged.
  Tensor<T>& grad_at(int id) {
    Node& n = nodes_[static_cast<size_t>(id)];
    if (n.grad.data.empty()) n.grad = Tensor<T>::zeros(n.value.shape);
    return n.grad;
  }
  Tensor<T>& grad_at(Var v) { return grad_at(v.id); }
  const Tensor<T>& node_value(int id) const { return nodes_[static_cast<size_t>(id)].value; }

  void accumulate(Var v, const Tensor<T>& g) {
    auto& dst = grad_at(v);
    for (int i = 0; i < dst.numel(); ++i) dst.data[i] += g.data[i];
  }

  Var push(Tensor<T> value, std::function<void(Tape&, int)> bwd, int param_id = -1) {
    Node n;
    // Allocating the gradient next to its value keeps the pair on nearby
    // heap pages, which the interleaved reads/writes of backward() reward.
    if (grads_enabled_) n.grad = Tensor<T>::zeros(value.shape);
    n.value = std::move(value);
    n.backward = std::move(bwd);
    n.param_id = param_id;
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
  }

  void check_same_shape(Var a, Var b, const char* op) const {
    if (!val(a).same_shape(val(b)))
      throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(val(a).shape) +
                       " vs " + shape_str(val(b).shape));
  }

  std::vector<Node> nodes_;
  std::unordered_map<int, Var> param_vars_;
  bool grads_enabled_ = true;
};

}  // namespace evf
