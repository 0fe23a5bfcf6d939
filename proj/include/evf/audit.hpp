#pragma once

#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "evf/evidence_filter.hpp"
#include "evf/finite_diff.hpp"
#include "evf/train.hpp"

namespace evf {

// ---------------------------------------------------------------------------
// Shuffle audit: re-evaluate with options randomly permuted per instance.
// A permutation-equivariant model keeps its accuracy and its per-instance
// argmax; the residual measures how far the logits drift from the permuted
// originals.
// ---------------------------------------------------------------------------

struct ShuffleAuditReport {
  double baseline_accuracy = 0;
  std::vector<std::pair<uint64_t, double>> per_seed;  // audit seed -> accuracy
  double accuracy_spread = 0;      // max - min over baseline and per-seed
  double max_logit_residual = 0;   // max_i |logits(perm x)[i] - logits(x)[perm[i]]|
  double argmax_change_fraction = 0;
};

template <typename T>
ShuffleAuditReport shuffle_audit(const Model<T>& model, const std::vector<McqaInstance>& data,
                                 const std::vector<uint64_t>& seeds) {
  if (data.empty()) throw ContractError("shuffle audit: empty dataset");
  if (seeds.empty()) throw ContractError("shuffle audit: need at least one seed");

  std::vector<Tensor<T>> base_logits;
  base_logits.reserve(data.size());
  int base_correct = 0;
  for (const auto& inst : data) {
    base_logits.push_back(model_logits(model, inst));
    if (argmax_logits(base_logits.back()) == inst.label) ++base_correct;
  }

  ShuffleAuditReport report;
  report.baseline_accuracy = static_cast<double>(base_correct) / static_cast<double>(data.size());
  double acc_min = report.baseline_accuracy;
  double acc_max = report.baseline_accuracy;
  int64_t changed = 0;

  for (uint64_t seed : seeds) {
    Rng rng(seed);
    int correct = 0;
    for (size_t i = 0; i < data.size(); ++i) {
      const auto perm = random_permutation(rng);
      const McqaInstance shuffled = permute_options(data[i], perm);
      const Tensor<T> logits = model_logits(model, shuffled);
      if (argmax_logits(logits) == shuffled.label) ++correct;
      for (int j = 0; j < kNumOptions; ++j) {
        const double residual = std::abs(static_cast<double>(logits.data[static_cast<size_t>(j)]) -
                                         static_cast<double>(base_logits[i].data[static_cast<size_t>(perm[static_cast<size_t>(j)])]));
        report.max_logit_residual = std::max(report.max_logit_residual, residual);
      }
      if (perm[static_cast<size_t>(argmax_logits(logits))] != argmax_logits(base_logits[i])) ++changed;
    }
    const double acc = static_cast<double>(correct) / static_cast<double>(data.size());
    report.per_seed.emplace_back(seed, acc);
    acc_min = std::min(acc_min, acc);
    acc_max = std::max(acc_max, acc);
  }
  report.accuracy_spread = acc_max - acc_min;
  report.argmax_change_fraction =
      static_cast<double>(changed) / static_cast<double>(data.size() * seeds.size());
  return report;
}

std::string format_shuffle_report(const ShuffleAuditReport& r);

// ---------------------------------------------------------------------------
// Filter inspection: per-block (alpha, beta), their product, and the worst
// commutation residual against all 24 option-permutation matrices.
// ---------------------------------------------------------------------------

struct FilterRow {
  int block;  // -1 means one filter shared across blocks
  double alpha = 0;
  double beta = 0;
  double product = 0;
  double commutation_residual = 0;
};

struct InspectFilterReport {
  std::vector<FilterRow> rows;
  double alpha_mean = 0, alpha_std = 0;
  double beta_mean = 0, beta_std = 0;
  bool opposite_sign_all = false;  // alpha_k * beta_k < 0 on every row
};

template <typename T>
InspectFilterReport inspect_filter(const Model<T>& model) {
  if (!constrained_filter(model.cfg.mode))
    throw ContractError("inspect-filter requires a checkpoint with a constrained filter "
                        "(constrained-no-fusion, fusion-shared-filter, or fusion-per-block-filter)");

  const auto perms = all_permutations_of_4();
  InspectFilterReport report;
  const int slots = static_cast<int>(model.head.filter_alpha.size());
  for (int s = 0; s < slots; ++s) {
    FilterRow row;
    if (model.cfg.mode == AblationMode::FusionSharedFilter) row.block = -1;
    else if (model.cfg.mode == AblationMode::ConstrainedNoFusion) row.block = model.cfg.encoder.blocks - 1;
    else row.block = s;
    row.alpha = static_cast<double>(model.store[model.head.filter_alpha[static_cast<size_t>(s)]].value.item());
    row.beta = static_cast<double>(model.store[model.head.filter_beta[static_cast<size_t>(s)]].value.item());
    row.product = row.alpha * row.beta;
    const Tensor<double> a = build_filter<double>(row.alpha, row.beta);
    for (const auto& perm : perms)
      row.commutation_residual =
          std::max(row.commutation_residual, check_commutation(a, permutation_matrix<double>(perm)));
    report.rows.push_back(row);
  }

  double a_sum = 0, b_sum = 0;
  for (const auto& row : report.rows) {
    a_sum += row.alpha;
    b_sum += row.beta;
  }
  const double n = static_cast<double>(report.rows.size());
  report.alpha_mean = a_sum / n;
  report.beta_mean = b_sum / n;
  double a_var = 0, b_var = 0;
  for (const auto& row : report.rows) {
    a_var += (row.alpha - report.alpha_mean) * (row.alpha - report.alpha_mean);
    b_var += (row.beta - report.beta_mean) * (row.beta - report.beta_mean);
  }
  report.alpha_std = std::sqrt(a_var / n);
  report.beta_std = std::sqrt(b_var / n);
  report.opposite_sign_all = true;
  for (const auto& row : report.rows)
    if (!(row.product < 0)) report.opposite_sign_all = false;
  return report;
}

std::string format_filter_report(const InspectFilterReport& r);

// ---------------------------------------------------------------------------
// Gradient check: reverse-mode gradients of the full training loss against
// central finite differences over every parameter value.
// ---------------------------------------------------------------------------

struct GradcheckReport {
  double max_rel_error = 0;
  std::string worst_param;
  std::vector<std::pair<std::string, double>> per_param;  // name -> max rel error
};

// A generator sized so its vocabulary and sequence lengths fit a small
// encoder; used by the gradient check and by quick tests.
inline GenSpec tiny_gen_spec(const EncoderConfig& enc, uint64_t seed) {
  GenSpec g;
  g.n_sentences = 3;
  g.n_evidence = 1;
  g.sent_len_min = 3;
  g.sent_len_max = 4;
  g.signal_tokens_per_option = 2;
  g.neutral_tokens = enc.vocab_size - kFirstContentId - 4 * g.signal_tokens_per_option;
  g.question_len = 2;
  g.option_len = 2;
  g.seed = seed;
  if (g.neutral_tokens < 2)
    throw ContractError("tiny generator: encoder vocabulary too small");
  g.validate();
  return g;
}

template <typename T>
GradcheckReport gradcheck_model(const ModelConfig& mc, uint64_t seed, double h, double floor) {
  Model<T> model = init_model<T>(mc, seed);
  Rng inst_rng(Rng::derive(seed, 0x9cad));
  const McqaInstance inst = generate_instance(tiny_gen_spec(mc.encoder, seed), inst_rng);

  model.store.zero_grads();
  {
    Tape<T> tape;
    Var loss = model_loss_tape(tape, model, inst);
    tape.backward(loss);
    tape.accumulate_param_grads(model.store);
  }
  const std::vector<T> analytic = model.store.flatten_grads();
  const std::vector<T> theta0 = model.store.flatten_values();

  auto loss_at = [&](const std::vector<T>& theta) {
    model.store.unflatten_values(theta);
    Tape<T> tape;
    Var loss = model_loss_tape(tape, model, inst);
    return static_cast<double>(tape.val(loss).item());
  };
  const std::vector<double> numeric = finite_diff_gradient(loss_at, theta0, h);
  model.store.unflatten_values(theta0);

  GradcheckReport report;
  size_t flat = 0;
  for (int p = 0; p < model.store.size(); ++p) {
    double param_worst = 0;
    for (int i = 0; i < model.store[p].value.numel(); ++i, ++flat) {
      const double err =
          gradient_rel_error(static_cast<double>(analytic[flat]), numeric[flat], floor);
      if (err > param_worst) param_worst = err;
      if (err > report.max_rel_error) {
        report.max_rel_error = err;
        report.worst_param = model.store[p].name + "[" + std::to_string(i) + "]";
      }
    }
    report.per_param.emplace_back(model.store[p].name, param_worst);
  }
  return report;
}

// Defaults tuned per precision: step size balances truncation against
// round-off, and the floor keeps near-zero gradients from inflating the
// relative error.
inline double default_gradcheck_h(Precision p) { return p == Precision::F64 ? 1e-5 : 5e-3; }
inline double default_gradcheck_floor(Precision p) { return p == Precision::F64 ? 1e-3 : 1e-1; }
inline double default_gradcheck_tolerance(Precision p) { return p == Precision::F64 ? 1e-6 : 1e-3; }

std::string format_gradcheck_report(const GradcheckReport& r, double tolerance);

// ---------------------------------------------------------------------------
// Ablation suite: retrain the same data under each architecture variant.
// The reference column carries the accuracies of the corresponding
// full-scale configurations for context; the desk-scale runs are expected to
// reproduce the ordering, not the magnitudes.
// ---------------------------------------------------------------------------

struct AblationRow {
  std::string label;
  AblationMode mode;
  double reference_accuracy = 0;  // percent, full-scale runs
  double accuracy = 0;            // fraction, this run
};

inline std::vector<AblationRow> ablation_presets() {
  return {
      {"w/o block fusion; w/o evidence filter", AblationMode::NoFilter, 60.0, 0},
      {"w/o block fusion; evidence filter w/o constraints", AblationMode::UnconstrainedNoFusion,
       63.8, 0},
      {"w/o block fusion; evidence filter", AblationMode::ConstrainedNoFusion, 65.0, 0},
      {"block fusion with same evidence filter", AblationMode::FusionSharedFilter, 64.0, 0},
      {"block fusion with different evidence filter (ours)", AblationMode::FusionPerBlockFilter,
       65.6, 0},
  };
}

template <typename T>
std::vector<AblationRow> run_ablation_suite(const TrainConfig& base,
                                            const std::vector<McqaInstance>& train_data,
                                            const std::vector<McqaInstance>& eval_data,
                                            std::ostream* progress = nullptr) {
  std::vector<AblationRow> rows = ablation_presets();
  for (auto& row : rows) {
    TrainConfig cfg = base;
    cfg.ablation_mode = row.mode;
    Model<T> model = init_model<T>(cfg.model_config(), cfg.seed);
    if (progress) (*progress) << "training: " << row.label << "\n" << std::flush;
    train_model(model, cfg, train_data, eval_data, nullptr);
    row.accuracy = evaluate(model, eval_data);
    if (progress)
      (*progress) << "  accuracy " << format_double(row.accuracy) << "\n" << std::flush;
  }
  return rows;
}

std::string format_ablation_table(const std::vector<AblationRow>& rows);

}  // namespace evf
