// Release acceptance suite. Each test exercises one release criterion
// end-to-end and prints a single summary line:
//
//   [CRITERION n] PASS|FAIL - <what was measured>
//
// The criteria, in order:
//   1. the constrained 4x4 filter commutes with all 24 option-permutation
//      matrices to 1e-12, and its product with any permutation matrix matches
//      the closed form exactly
//   2. a constrained-filter model is end-to-end equivariant under option
//      shuffles in 32-bit, with a zero argmax-change fraction
//   3. the unconstrained filter breaks commutation on essentially every
//      random draw, and a trained unconstrained model drifts under shuffles
//   4. reverse-mode gradients match central finite differences over every
//      parameter, across seeds, in both precisions
//   5. on the default synthetic benchmark the full model learns to >= 90%
//      within the step budget, beats the no-filter ablation on the canonical
//      seed, and the full >= constrained-no-fusion >= no-filter ordering
//      holds on at least 4 of 5 training seeds
//   6. an untrained model sits at chance, and the uniform-logit loss is ln 4
//   7. training is bit-deterministic: same config and seed give identical
//      checkpoints and metrics twice in a row
//   8. inspect_filter renders the per-block (alpha, beta, alpha*beta) table
//      and flags the opposite-sign pattern (reported, not required)

#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "evf/audit.hpp"
#include "evf/checkpoint.hpp"
#include "evf/config.hpp"
#include "evf/train.hpp"

namespace evf {
namespace {

namespace fs = std::filesystem;

constexpr double kLn4 = 1.3862943611198906;

class Timer {
 public:
  Timer() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

void print_criterion(int n, bool pass, const std::string& detail) {
  std::cout << "[CRITERION " << n << "] " << (pass ? "PASS" : "FAIL") << " - " << detail << "\n"
            << std::flush;
}

std::string fmt(double v) { return format_double(v); }

// ---------------------------------------------------------------------------
// The benchmark: the generator's default task (8 sentences, 2 evidence
// sentences, 4-8 tokens each, disjoint signal partitions) at 2000 train /
// 500 test instances, and the training regime the acceptance numbers are
// quoted for. Training runs in 32-bit, the harness default.
// ---------------------------------------------------------------------------

constexpr uint64_t kBenchmarkDataSeed = 99;
constexpr int kCanonicalSeed = 1;
constexpr int kOrderingSeeds[5] = {1, 2, 3, 4, 5};

TrainConfig benchmark_config(AblationMode mode, uint64_t train_seed) {
  TrainConfig cfg;
  cfg.ablation_mode = mode;
  cfg.seed = train_seed;
  cfg.batch_size = 8;
  cfg.learning_rate = 3e-3;
  cfg.warmup_fraction = 0.1;
  cfg.total_steps = 1000;
  cfg.eval_every = cfg.total_steps;  // single eval, after the final step
  GenSpec g;
  g.seed = kBenchmarkDataSeed;
  cfg.gen = g;
  return cfg;
}

struct BenchmarkData {
  std::vector<McqaInstance> train, test;
};

const BenchmarkData& benchmark_data() {
  static const BenchmarkData data = [] {
    const TrainConfig cfg = benchmark_config(AblationMode::FusionPerBlockFilter, 0);
    GenSpec train_spec = *cfg.gen;
    GenSpec test_spec = train_spec;
    test_spec.seed = Rng::derive(train_spec.seed, 0xe7a1);
    return BenchmarkData{generate_dataset(train_spec, cfg.gen_train_count),
                         generate_dataset(test_spec, cfg.gen_eval_count)};
  }();
  return data;
}

struct BenchmarkRun {
  Model<float> model;
  double accuracy = 0;
};

BenchmarkRun run_benchmark(AblationMode mode, uint64_t train_seed) {
  const TrainConfig cfg = benchmark_config(mode, train_seed);
  BenchmarkRun run{init_model<float>(cfg.model_config(), cfg.seed)};
  const TrainResult result =
      train_model(run.model, cfg, benchmark_data().train, benchmark_data().test);
  run.accuracy = result.evals.back().accuracy;
  return run;
}

// The canonical-seed full model is shared between criteria 5 and 8; it is
// trained on first use so either test can run in isolation.
std::optional<BenchmarkRun>& canonical_full_run() {
  static std::optional<BenchmarkRun> run;
  if (!run) run = run_benchmark(AblationMode::FusionPerBlockFilter, kCanonicalSeed);
  return run;
}

TEST(Acceptance, Criterion1_FilterCommutesWithEveryPermutationMatrix) {
  Timer timer;
  Rng rng(2024);
  const auto perms = all_permutations_of_4();

  double worst_commutation = 0;
  double worst_closed_form = 0;
  bool branch_exact = true;
  for (int trial = 0; trial < 1000; ++trial) {
    const double alpha = 4.0 * rng.uniform() - 2.0;
    const double beta = 4.0 * rng.uniform() - 2.0;
    const Tensor<double> a = build_filter(alpha, beta);
    for (const auto& perm : perms) {
      const Tensor<double> r = permutation_matrix<double>(perm);
      worst_commutation = std::max(worst_commutation, check_commutation(a, r));
      worst_closed_form = std::max(worst_closed_form, constrained_product_residual(alpha, beta, r));
      // one-hot columns make the product exact, so equality is bitwise:
      // (A*R)[i][j] is alpha where R[i][j]=1 and beta elsewhere
      const Tensor<double> prod = matmul(a, r);
      for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
          if (prod.at(i, j) != (r.at(i, j) == 1.0 ? alpha : beta)) branch_exact = false;
    }
  }

  const double elapsed = timer.seconds();
  const bool pass = worst_commutation <= 1e-12 && worst_closed_form <= 1e-12 && branch_exact &&
                    elapsed < 1.0;
  print_criterion(1, pass,
                  "1000 (alpha,beta) x 24 permutations: max |AR-RA| = " + fmt(worst_commutation) +
                      " (<= 1e-12), closed-form residual = " + fmt(worst_closed_form) +
                      ", branch form bitwise exact = " + (branch_exact ? "yes" : "no") + ", " +
                      fmt(elapsed) + " s (< 1 s)");
  EXPECT_LE(worst_commutation, 1e-12);
  EXPECT_LE(worst_closed_form, 1e-12);
  EXPECT_TRUE(branch_exact);
  EXPECT_LT(elapsed, 1.0);
}

TEST(Acceptance, Criterion2_ConstrainedModelIsEquivariantEndToEnd) {
  Timer timer;
  ModelConfig mc;
  mc.mode = AblationMode::FusionPerBlockFilter;
  Model<float> model = init_model<float>(mc, 7);
  // nonzero filters so the check covers the full mixing path, not the
  // degenerate all-zero initialization
  Rng rng(11);
  for (size_t k = 0; k < model.head.filter_alpha.size(); ++k) {
    model.store[model.head.filter_alpha[k]].value.data[0] = static_cast<float>(0.5 * rng.normal());
    model.store[model.head.filter_beta[k]].value.data[0] = static_cast<float>(0.5 * rng.normal());
  }

  GenSpec g;
  g.seed = 31;
  const auto data = generate_dataset(g, 100);
  const auto perms = all_permutations_of_4();

  double worst_residual = 0;
  int64_t argmax_changes = 0;
  for (const auto& inst : data) {
    const Tensor<float> base = model_logits(model, inst);
    const int base_pick = argmax_logits(base);
    for (const auto& perm : perms) {
      const Tensor<float> shuffled = model_logits(model, permute_options(inst, perm));
      for (int i = 0; i < kNumOptions; ++i) {
        worst_residual = std::max(
            worst_residual, std::abs(static_cast<double>(shuffled.data[static_cast<size_t>(i)]) -
                                     static_cast<double>(base.data[perm[static_cast<size_t>(i)]])));
      }
      if (perm[static_cast<size_t>(argmax_logits(shuffled))] != base_pick) ++argmax_changes;
    }
  }

  const double elapsed = timer.seconds();
  const bool pass = worst_residual <= 1e-4 && argmax_changes == 0 && elapsed < 60.0;
  print_criterion(2, pass,
                  "100 instances x 24 shuffles (32-bit): max logit residual = " +
                      fmt(worst_residual) + " (<= 1e-4), argmax changes = " +
                      std::to_string(argmax_changes) + " (= 0), " + fmt(elapsed) + " s (< 1 min)");
  EXPECT_LE(worst_residual, 1e-4);
  EXPECT_EQ(argmax_changes, 0);
  EXPECT_LT(elapsed, 60.0);
}

TEST(Acceptance, Criterion3_UnconstrainedFilterBreaksTheSymmetry) {
  // (a) random unconstrained draws essentially never commute
  const auto perms = all_permutations_of_4();
  ModelConfig mc;
  mc.mode = AblationMode::UnconstrainedNoFusion;
  int broken = 0;
  for (int seed = 1; seed <= 100; ++seed) {
    const auto model = init_model<double>(mc, static_cast<uint64_t>(seed));
    const Tensor<double>& a = model.store[model.head.filter_matrix].value;
    double worst = 0;
    for (const auto& perm : perms)
      worst = std::max(worst, check_commutation(a, permutation_matrix<double>(perm)));
    if (worst > 1e-3) ++broken;
  }

  // (b) a trained unconstrained model is measurably order-sensitive
  TrainConfig cfg = benchmark_config(AblationMode::UnconstrainedNoFusion, kCanonicalSeed);
  cfg.total_steps = 300;
  cfg.eval_every = cfg.total_steps;
  Model<float> model = init_model<float>(cfg.model_config(), cfg.seed);
  train_model(model, cfg, benchmark_data().train, benchmark_data().test);
  const ShuffleAuditReport audit = shuffle_audit(model, benchmark_data().test, {1, 2, 3});

  const bool pass = broken >= 99 && audit.accuracy_spread > 0;
  print_criterion(3, pass,
                  std::to_string(broken) +
                      "/100 random unconstrained inits break commutation (>= 99); trained "
                      "unconstrained shuffle audit: accuracy spread = " +
                      fmt(audit.accuracy_spread) + " (> 0), max logit residual = " +
                      fmt(audit.max_logit_residual));
  EXPECT_GE(broken, 99);
  EXPECT_GT(audit.accuracy_spread, 0.0);
}

TEST(Acceptance, Criterion4_GradientsMatchFiniteDifferences) {
  Timer timer;
  ModelConfig mc;
  mc.encoder.blocks = 2;
  mc.encoder.width = 8;
  mc.encoder.heads = 2;
  mc.encoder.vocab_size = 32;
  mc.encoder.max_len = 32;
  mc.encoder.ffn_dim = 12;
  mc.mode = AblationMode::FusionPerBlockFilter;

  double worst64 = 0, worst32 = 0;
  std::string worst64_param, worst32_param;
  for (uint64_t seed = 1; seed <= 20; ++seed) {
    const GradcheckReport r64 =
        gradcheck_model<double>(mc, seed, default_gradcheck_h(Precision::F64),
                                default_gradcheck_floor(Precision::F64));
    if (r64.max_rel_error > worst64) {
      worst64 = r64.max_rel_error;
      worst64_param = r64.worst_param;
    }
    const GradcheckReport r32 =
        gradcheck_model<float>(mc, seed, default_gradcheck_h(Precision::F32),
                               default_gradcheck_floor(Precision::F32));
    if (r32.max_rel_error > worst32) {
      worst32 = r32.max_rel_error;
      worst32_param = r32.worst_param;
    }
  }

  const double elapsed = timer.seconds();
  const bool pass = worst64 < 1e-6 && worst32 < 1e-3 && elapsed < 120.0;
  print_criterion(4, pass,
                  "gradcheck d=8 K=2, 20 seeds, every parameter: worst 64-bit rel err = " +
                      fmt(worst64) + " (< 1e-6, at " + worst64_param +
                      "), worst 32-bit rel err = " + fmt(worst32) + " (< 1e-3, at " +
                      worst32_param + "), " + fmt(elapsed) + " s (< 2 min)");
  EXPECT_LT(worst64, 1e-6);
  EXPECT_LT(worst32, 1e-3);
  EXPECT_LT(elapsed, 120.0);
}

TEST(Acceptance, Criterion5_FullModelLearnsAndTheAblationOrderingHolds) {
  Timer timer;

  const BenchmarkRun& canonical = *canonical_full_run();
  const double canonical_full = canonical.accuracy;
  const double canonical_nf =
      run_benchmark(AblationMode::NoFilter, kCanonicalSeed).accuracy;

  int ordering_holds = 0;
  std::string per_seed;
  for (const int seed : kOrderingSeeds) {
    const double full = seed == kCanonicalSeed
                            ? canonical_full
                            : run_benchmark(AblationMode::FusionPerBlockFilter,
                                            static_cast<uint64_t>(seed))
                                  .accuracy;
    const double cnf =
        run_benchmark(AblationMode::ConstrainedNoFusion, static_cast<uint64_t>(seed)).accuracy;
    const double nf = seed == kCanonicalSeed
                          ? canonical_nf
                          : run_benchmark(AblationMode::NoFilter, static_cast<uint64_t>(seed))
                                .accuracy;
    const bool holds = full >= cnf && cnf >= nf;
    if (holds) ++ordering_holds;
    per_seed += " s" + std::to_string(seed) + ":" + fmt(full) + "/" + fmt(cnf) + "/" + fmt(nf) +
                (holds ? "" : "(x)");
  }

  const double elapsed = timer.seconds();
  const bool pass = canonical_full >= 0.90 && canonical_nf < canonical_full &&
                    ordering_holds >= 4 && elapsed < 900.0;
  print_criterion(
      5, pass,
      "default benchmark (2000 train / 500 test, 2 evidence sentences), 1000 steps: full = " +
          fmt(canonical_full) + " (>= 0.9) vs no-filter = " + fmt(canonical_nf) +
          " (strictly lower) on seed " + std::to_string(kCanonicalSeed) +
          "; full >= constrained-no-fusion >= no-filter on " + std::to_string(ordering_holds) +
          "/5 seeds (>= 4):" + per_seed + "; " + fmt(elapsed) + " s (< 15 min)");
  EXPECT_GE(canonical_full, 0.90);
  EXPECT_LT(canonical_nf, canonical_full);
  EXPECT_GE(ordering_holds, 4);
  EXPECT_LT(elapsed, 900.0);
}

TEST(Acceptance, Criterion6_UntrainedModelSitsAtChance) {
  GenSpec g;
  g.seed = 5150;
  const auto data = generate_dataset(g, 2000);
  const auto model = init_model<float>(ModelConfig{}, 808);
  const double accuracy = evaluate(model, data);

  Tape<double> tape;
  const double uniform_loss =
      tape.val(tape.softmax_cross_entropy(tape.input(Tensor<double>::zeros({4})), 0)).item();
  const double ln4_err = std::abs(uniform_loss - kLn4);

  const bool pass = std::abs(accuracy - 0.25) <= 0.05 && ln4_err <= 1e-6;
  print_criterion(6, pass,
                  "untrained accuracy = " + fmt(accuracy) +
                      " over 2000 balanced instances (0.25 +/- 0.05); uniform-logit loss = " +
                      fmt(uniform_loss) + " (|loss - ln 4| = " + fmt(ln4_err) + " <= 1e-6)");
  EXPECT_NEAR(accuracy, 0.25, 0.05);
  EXPECT_NEAR(uniform_loss, kLn4, 1e-6);
}

TEST(Acceptance, Criterion7_TrainingIsBitDeterministic) {
  TrainConfig cfg = benchmark_config(AblationMode::FusionPerBlockFilter, 4242);
  cfg.total_steps = 60;
  cfg.eval_every = 20;

  auto run_once = [&](const std::string& dir, std::string* metrics) {
    Model<float> model = init_model<float>(cfg.model_config(), cfg.seed);
    std::ostringstream out;
    const TrainResult result =
        train_model(model, cfg, benchmark_data().train, benchmark_data().test, &out);
    *metrics = out.str();
    fs::remove_all(dir);
    save_checkpoint(dir, model, cfg, result.steps, result.evals);
  };
  auto file_bytes = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  };

  const fs::path base = fs::path(::testing::TempDir()) / "acceptance_determinism";
  std::string metrics_a, metrics_b;
  run_once((base / "a").string(), &metrics_a);
  run_once((base / "b").string(), &metrics_b);

  const bool params_equal = file_bytes(base / "a" / "params.bin") == file_bytes(base / "b" / "params.bin");
  const bool manifest_equal =
      file_bytes(base / "a" / "manifest.json") == file_bytes(base / "b" / "manifest.json");
  const bool metrics_equal = metrics_a == metrics_b;
  const bool nonempty = !metrics_a.empty() && fs::file_size(base / "a" / "params.bin") > 0;

  const bool pass = params_equal && manifest_equal && metrics_equal && nonempty;
  print_criterion(7, pass,
                  std::string("two runs, same config and seed: params.bin bytes equal = ") +
                      (params_equal ? "yes" : "no") + ", manifest bytes equal = " +
                      (manifest_equal ? "yes" : "no") + ", metrics CSV equal = " +
                      (metrics_equal ? "yes" : "no"));
  EXPECT_TRUE(params_equal);
  EXPECT_TRUE(manifest_equal);
  EXPECT_TRUE(metrics_equal);
  EXPECT_TRUE(nonempty);
}

TEST(Acceptance, Criterion8_FilterInspectionRendersTheTable) {
  const BenchmarkRun& canonical = *canonical_full_run();
  const InspectFilterReport report = inspect_filter(canonical.model);
  const std::string table = format_filter_report(report);

  const int blocks = canonical.model.cfg.encoder.blocks;
  bool rows_ok = static_cast<int>(report.rows.size()) == blocks;
  bool products_ok = true;
  bool moved_off_zero = false;
  for (int k = 0; k < static_cast<int>(report.rows.size()); ++k) {
    const FilterRow& row = report.rows[static_cast<size_t>(k)];
    rows_ok = rows_ok && row.block == k;
    products_ok = products_ok && std::isfinite(row.alpha) && std::isfinite(row.beta) &&
                  std::abs(row.product - row.alpha * row.beta) <= 1e-12 &&
                  row.commutation_residual <= 1e-6;
    if (row.alpha != 0.0 || row.beta != 0.0) moved_off_zero = true;
  }
  const bool table_ok = table.find("alpha*beta") != std::string::npos &&
                        table.find("max |AR-RA|") != std::string::npos &&
                        table.find("opposite signs on every block:") != std::string::npos;

  const bool pass = rows_ok && products_ok && moved_off_zero && table_ok;
  print_criterion(8, pass,
                  std::string("per-block (alpha, beta, alpha*beta) table rendered for ") +
                      std::to_string(blocks) + " blocks from the trained canonical model; "
                      "opposite-sign pattern on every block: " +
                      (report.opposite_sign_all ? "yes" : "no") + " (reported, not required)");
  std::cout << table << std::flush;
  EXPECT_TRUE(rows_ok);
  EXPECT_TRUE(products_ok);
  EXPECT_TRUE(moved_off_zero);
  EXPECT_TRUE(table_ok);
}

}  // namespace
}  // namespace evf
