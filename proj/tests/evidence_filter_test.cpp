// The 4x4 evidence filter and its permutation algebra: constrained filters
// (alpha diagonal, beta elsewhere) commute with every option reordering,
// generic matrices do not, and the filtered block is LayerNorm(H + A.H).

#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "evf/autodiff.hpp"
#include "evf/evidence_filter.hpp"
#include "evf/finite_diff.hpp"
#include "evf/rng.hpp"

namespace evf {
namespace {

Tensor<double> random_matrix(int r, int c, Rng& rng, double scale = 1.0) {
  Tensor<double> t = Tensor<double>::zeros({r, c});
  for (auto& v : t.data) v = scale * rng.normal();
  return t;
}

TEST(BuildFilter, PlacesAlphaOnDiagonalBetaElsewhere) {
  const Tensor<double> a = build_filter(2.5, -0.75);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      EXPECT_EQ(a.at(i, j), i == j ? 2.5 : -0.75);
}

TEST(ApplyFilter, MatchesExplicitRowMixing) {
  Rng rng(3);
  const Tensor<double> h = random_matrix(4, 6, rng);
  const Tensor<double> a = build_filter(1.25, -0.5);
  const Tensor<double> out = apply_filter(a, h);
  // row i of A.H is (1+... ) explicit: alpha*h_i + beta*sum_{j!=i} h_j
  for (int i = 0; i < 4; ++i)
    for (int c = 0; c < 6; ++c) {
      double expect = 1.25 * h.at(i, c);
      for (int j = 0; j < 4; ++j)
        if (j != i) expect += -0.5 * h.at(j, c);
      EXPECT_NEAR(out.at(i, c), expect, 1e-12);
    }
}

TEST(ApplyFilter, RejectsWrongShapes) {
  EXPECT_THROW(apply_filter(Tensor<double>::zeros({3, 4}), Tensor<double>::zeros({4, 5})),
               ShapeError);
  EXPECT_THROW(apply_filter(Tensor<double>::zeros({4, 4}), Tensor<double>::zeros({3, 5})),
               ShapeError);
}

TEST(Permutations, EnumeratesAllTwentyFourDistinct) {
  const auto perms = all_permutations_of_4();
  std::set<std::array<int, 4>> unique(perms.begin(), perms.end());
  EXPECT_EQ(unique.size(), 24u);
  EXPECT_EQ(perms.front(), (std::array<int, 4>{0, 1, 2, 3}));
}

TEST(Permutations, MatrixHasOneHotRowsAndColumns) {
  for (const auto& perm : all_permutations_of_4()) {
    const Tensor<double> r = permutation_matrix<double>(perm);
    for (int i = 0; i < 4; ++i) {
      double row_sum = 0, col_sum = 0;
      for (int j = 0; j < 4; ++j) {
        row_sum += r.at(i, j);
        col_sum += r.at(j, i);
        EXPECT_TRUE(r.at(i, j) == 0.0 || r.at(i, j) == 1.0);
      }
      EXPECT_EQ(row_sum, 1.0);
      EXPECT_EQ(col_sum, 1.0);
      EXPECT_EQ(r.at(i, perm[static_cast<size_t>(i)]), 1.0);
    }
  }
}

TEST(Permutations, RejectsNonBijections) {
  EXPECT_THROW(permutation_matrix<double>({0, 0, 1, 2}), ContractError);
  EXPECT_THROW(permutation_matrix<double>({0, 1, 2, 4}), ContractError);
  EXPECT_THROW(permutation_matrix<double>({-1, 1, 2, 3}), ContractError);
}

TEST(Permutations, MatrixActionMatchesPermuteRows) {
  Rng rng(9);
  const Tensor<double> h = random_matrix(4, 5, rng);
  for (const auto& perm : all_permutations_of_4()) {
    const Tensor<double> via_matrix = matmul(permutation_matrix<double>(perm), h);
    const Tensor<double> via_rows = permute_rows(h, perm);
    EXPECT_EQ(via_matrix.data, via_rows.data);
    for (int i = 0; i < 4; ++i)
      for (int c = 0; c < 5; ++c)
        EXPECT_EQ(via_matrix.at(i, c), h.at(perm[static_cast<size_t>(i)], c));
  }
}

// Matrix product of two row exchanges is the row exchange of the composed
// permutation: (R_p R_q H)[i] = H[q[p[i]]]. All 576 pairs.
TEST(Permutations, MatricesComposeAsPermutations) {
  const auto perms = all_permutations_of_4();
  for (const auto& p : perms)
    for (const auto& q : perms) {
      std::array<int, 4> composed{};
      for (int i = 0; i < 4; ++i)
        composed[static_cast<size_t>(i)] = q[static_cast<size_t>(p[static_cast<size_t>(i)])];
      const Tensor<double> product =
          matmul(permutation_matrix<double>(p), permutation_matrix<double>(q));
      EXPECT_EQ(product.data, permutation_matrix<double>(composed).data);
    }
}

TEST(Commutation, ConstrainedFilterCommutesWithEveryExchange) {
  Rng rng(17);
  const auto perms = all_permutations_of_4();
  for (int trial = 0; trial < 50; ++trial) {
    const double alpha = 4.0 * rng.normal();
    const double beta = 4.0 * rng.normal();
    const Tensor<double> a = build_filter(alpha, beta);
    for (const auto& perm : perms) {
      EXPECT_LE(check_commutation(a, permutation_matrix<double>(perm)), 1e-12);
      EXPECT_LE(constrained_product_residual(alpha, beta, permutation_matrix<double>(perm)),
                1e-12);
    }
  }
}

TEST(Commutation, GenericMatrixFailsForSomeExchange) {
  Rng rng(23);
  const auto perms = all_permutations_of_4();
  for (int trial = 0; trial < 50; ++trial) {
    const Tensor<double> a = random_matrix(4, 4, rng, 0.25);
    double worst = 0;
    for (const auto& perm : perms)
      worst = std::max(worst, check_commutation(a, permutation_matrix<double>(perm)));
    EXPECT_GT(worst, 1e-3) << "trial " << trial;
  }
}

TEST(Commutation, IdentityPermutationAlwaysCommutes) {
  Rng rng(29);
  const Tensor<double> a = random_matrix(4, 4, rng);
  EXPECT_EQ(check_commutation(a, permutation_matrix<double>({0, 1, 2, 3})), 0.0);
}

TEST(FilterBlock, WithoutFilterIsPlainLayerNorm) {
  Rng rng(5);
  const Tensor<double> h = random_matrix(4, 6, rng);
  const Tensor<double> gain = Tensor<double>::full({6}, 1.0);
  const Tensor<double> bias = Tensor<double>::zeros({6});
  const Tensor<double> out = filter_block<double>(h, std::nullopt, gain, bias);

  Tape<double> tape;
  const Tensor<double> ln =
      tape.val(tape.layer_norm(tape.input(h), tape.input(gain), tape.input(bias)));
  EXPECT_EQ(out.data, ln.data);
}

TEST(FilterBlock, ZeroFilterEqualsNoFilter) {
  Rng rng(6);
  const Tensor<double> h = random_matrix(4, 6, rng);
  const Tensor<double> gain = Tensor<double>::full({6}, 1.0);
  const Tensor<double> bias = Tensor<double>::zeros({6});
  const Tensor<double> with_zero = filter_block<double>(h, build_filter(0.0, 0.0), gain, bias);
  const Tensor<double> without = filter_block<double>(h, std::nullopt, gain, bias);
  EXPECT_LE(max_abs_diff(with_zero, without), 1e-15);
}

TEST(FilterBlock, MatchesHandComputedNormalization) {
  Rng rng(8);
  const Tensor<double> h = random_matrix(4, 6, rng);
  const double alpha = 0.3, beta = -0.1;
  Tensor<double> gain = Tensor<double>::zeros({6});
  Tensor<double> bias = Tensor<double>::zeros({6});
  for (auto& g : gain.data) g = rng.normal();
  for (auto& b : bias.data) b = rng.normal();

  const Tensor<double> out = filter_block<double>(h, build_filter(alpha, beta), gain, bias);

  Tensor<double> pre = apply_filter(build_filter(alpha, beta), h);
  for (size_t i = 0; i < pre.data.size(); ++i) pre.data[i] += h.data[i];
  for (int i = 0; i < 4; ++i) {
    double mean = 0;
    for (int c = 0; c < 6; ++c) mean += pre.at(i, c);
    mean /= 6;
    double var = 0;
    for (int c = 0; c < 6; ++c) var += (pre.at(i, c) - mean) * (pre.at(i, c) - mean);
    var /= 6;
    for (int c = 0; c < 6; ++c) {
      const double norm = (pre.at(i, c) - mean) / std::sqrt(var + 1e-5);
      EXPECT_NEAR(out.at(i, c), norm * gain.data[static_cast<size_t>(c)] +
                                    bias.data[static_cast<size_t>(c)],
                  1e-10);
    }
  }
}

// The heart of the equivariance argument: reordering the rows of H before the
// constrained filtered block gives exactly the reordered output, because the
// filter commutes with the exchange and LayerNorm acts row-wise.
TEST(FilterBlock, ConstrainedFilterIsPermutationEquivariant) {
  Rng rng(13);
  const Tensor<double> gain = Tensor<double>::full({6}, 1.0);
  const Tensor<double> bias = Tensor<double>::zeros({6});
  for (int trial = 0; trial < 10; ++trial) {
    const Tensor<double> h = random_matrix(4, 6, rng);
    const Tensor<double> a = build_filter(rng.normal(), rng.normal());
    const Tensor<double> base = filter_block<double>(h, a, gain, bias);
    for (const auto& perm : all_permutations_of_4()) {
      const Tensor<double> permuted_in = filter_block<double>(permute_rows(h, perm), a, gain, bias);
      EXPECT_LE(max_abs_diff(permuted_in, permute_rows(base, perm)), 1e-12);
    }
  }
}

TEST(FilterBlock, GenericFilterBreaksEquivariance) {
  Rng rng(19);
  const Tensor<double> gain = Tensor<double>::full({6}, 1.0);
  const Tensor<double> bias = Tensor<double>::zeros({6});
  const Tensor<double> h = random_matrix(4, 6, rng);
  const Tensor<double> a = random_matrix(4, 4, rng, 0.5);
  const Tensor<double> base = filter_block<double>(h, a, gain, bias);
  double worst = 0;
  for (const auto& perm : all_permutations_of_4()) {
    const Tensor<double> permuted_in = filter_block<double>(permute_rows(h, perm), a, gain, bias);
    worst = std::max(worst, max_abs_diff(permuted_in, permute_rows(base, perm)));
  }
  EXPECT_GT(worst, 1e-3);
}

// Gradient of a scalar readout of the filtered block with respect to alpha
// and beta, checked against central finite differences.
TEST(FilterBlock, AlphaBetaGradientsMatchFiniteDifferences) {
  Rng rng(21);
  const Tensor<double> h = random_matrix(4, 6, rng);
  ParamStore<double> store;
  const int alpha_id = store.add("alpha", Tensor<double>::full({1}, 0.3));
  const int beta_id = store.add("beta", Tensor<double>::full({1}, -0.2));
  const int gain_id = store.add("gain", Tensor<double>::full({6}, 1.0));
  const int bias_id = store.add("bias", Tensor<double>::zeros({6}));

  auto build = [&](Tape<double>& tape) {
    Var filter = tape.filter_from_scalars(tape.param(store, alpha_id), tape.param(store, beta_id));
    Var out = filter_block_tape(tape, tape.input(h), filter, tape.param(store, gain_id),
                                tape.param(store, bias_id));
    return tape.sum(tape.mul(out, out));
  };

  store.zero_grads();
  Tape<double> tape;
  Var loss = build(tape);
  tape.backward(loss);
  tape.accumulate_param_grads(store);
  const std::vector<double> analytic = store.flatten_grads();

  const std::vector<double> theta0 = store.flatten_values();
  auto f = [&](const std::vector<double>& theta) {
    store.unflatten_values(theta);
    Tape<double> t;
    return t.val(build(t)).item();
  };
  const std::vector<double> numeric = finite_diff_gradient(f, theta0, 1e-5);
  store.unflatten_values(theta0);

  ASSERT_EQ(analytic.size(), numeric.size());
  for (size_t i = 0; i < analytic.size(); ++i)
    EXPECT_LT(gradient_rel_error(analytic[i], numeric[i], 1e-3), 1e-6) << "coordinate " << i;
}

}  // namespace
}  // namespace evf
