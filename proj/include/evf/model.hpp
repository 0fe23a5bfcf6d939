#pragma once

#include <optional>
#include <string>
#include <vector>

#include "evf/encoder.hpp"
#include "evf/evidence_filter.hpp"
#include "evf/synth.hpp"

namespace evf {

// The five ablation configurations. "Fusion" is the learned combination of
// all block outputs; without it only the final block feeds the classifier.
enum class AblationMode {
  NoFilter,               // w/o fusion, w/o filter
  UnconstrainedNoFusion,  // w/o fusion, free 4x4 filter
  ConstrainedNoFusion,    // w/o fusion, (alpha, beta) filter
  FusionSharedFilter,     // fusion, one (alpha, beta) for all blocks
  FusionPerBlockFilter,   // fusion, per-block (alpha_k, beta_k)
};

inline std::string to_string(AblationMode m) {
  switch (m) {
    case AblationMode::NoFilter: return "no-filter";
    case AblationMode::UnconstrainedNoFusion: return "unconstrained-no-fusion";
    case AblationMode::ConstrainedNoFusion: return "constrained-no-fusion";
    case AblationMode::FusionSharedFilter: return "fusion-shared-filter";
    case AblationMode::FusionPerBlockFilter: return "fusion-per-block-filter";
  }
  throw ContractError("unknown ablation mode");
}

inline AblationMode ablation_mode_from_string(const std::string& s) {
  if (s == "no-filter") return AblationMode::NoFilter;
  if (s == "unconstrained-no-fusion") return AblationMode::UnconstrainedNoFusion;
  if (s == "constrained-no-fusion") return AblationMode::ConstrainedNoFusion;
  if (s == "fusion-shared-filter") return AblationMode::FusionSharedFilter;
  if (s == "fusion-per-block-filter") return AblationMode::FusionPerBlockFilter;
  throw ContractError("unknown ablation mode: " + s);
}

inline bool uses_fusion(AblationMode m) {
  return m == AblationMode::FusionSharedFilter || m == AblationMode::FusionPerBlockFilter;
}
inline bool constrained_filter(AblationMode m) {
  return m == AblationMode::ConstrainedNoFusion || m == AblationMode::FusionSharedFilter ||
         m == AblationMode::FusionPerBlockFilter;
}

struct ModelConfig {
  EncoderConfig encoder;
  AblationMode mode = AblationMode::FusionPerBlockFilter;
  bool aux_group = true;
  // Free filter entries start away from zero so the unconstrained ablation
  // is measurably order-sensitive from the first step.
  double unconstrained_init_std = 0.25;
};

// Parameter ids of the filter + fusion + scoring stage. Only what the mode
// actually uses is allocated.
struct HeadParamIds {
  std::vector<int> filter_alpha;  // one entry per filtered block (1 when tied/shared)
  std::vector<int> filter_beta;
  int filter_matrix = -1;         // unconstrained mode only
  std::vector<int> filter_ln_gain, filter_ln_bias;
  int fusion_weights = -1, fusion_bias = -1;
  int score_w = -1, score_b = -1;
  int aux_w = -1, aux_b = -1;
};

template <typename T>
struct Model {
  ModelConfig cfg;
  ParamStore<T> store;
  EncoderParamIds enc;
  HeadParamIds head;
};

template <typename T>
Model<T> init_model(const ModelConfig& cfg, uint64_t seed) {
  cfg.encoder.validate();
  Model<T> m;
  m.cfg = cfg;
  Rng rng(Rng::derive(seed, 0xe5f11u));
  m.enc = register_encoder_params(m.store, cfg.encoder, rng);

  const int d = cfg.encoder.width;
  const int blocks = cfg.encoder.blocks;
  auto& head = m.head;
  auto& store = m.store;

  const int filtered_blocks = uses_fusion(cfg.mode) ? blocks : 1;
  switch (cfg.mode) {
    case AblationMode::NoFilter:
      break;
    case AblationMode::UnconstrainedNoFusion:
      head.filter_matrix =
          store.add("filter.matrix", normal_init<T>({4, 4}, cfg.unconstrained_init_std, rng));
      break;
    case AblationMode::ConstrainedNoFusion:
    case AblationMode::FusionSharedFilter:
      head.filter_alpha.push_back(store.add("filter.alpha", Tensor<T>::zeros({1})));
      head.filter_beta.push_back(store.add("filter.beta", Tensor<T>::zeros({1})));
      break;
    case AblationMode::FusionPerBlockFilter:
      for (int k = 0; k < blocks; ++k) {
        head.filter_alpha.push_back(
            store.add("filter" + std::to_string(k) + ".alpha", Tensor<T>::zeros({1})));
        head.filter_beta.push_back(
            store.add("filter" + std::to_string(k) + ".beta", Tensor<T>::zeros({1})));
      }
      break;
  }
  for (int k = 0; k < filtered_blocks; ++k) {
    const std::string pre =
        uses_fusion(cfg.mode) ? "filter" + std::to_string(k) + ".ln." : "filter.ln.";
    head.filter_ln_gain.push_back(store.add(pre + "gain", Tensor<T>::full({d}, T(1))));
    head.filter_ln_bias.push_back(store.add(pre + "bias", Tensor<T>::zeros({d})));
  }
  if (uses_fusion(cfg.mode)) {
    head.fusion_weights =
        store.add("fusion.w_bf", Tensor<T>::full({blocks}, T(1) / static_cast<T>(blocks)));
    head.fusion_bias = store.add("fusion.b_bf", Tensor<T>::zeros({1}));
  }
  head.score_w = store.add("head.w_out", normal_init<T>({d}, cfg.encoder.init_std, rng));
  head.score_b = store.add("head.b_out", Tensor<T>::zeros({1}));
  if (cfg.aux_group) {
    head.aux_w = store.add("head.w_aux", normal_init<T>({d}, cfg.encoder.init_std, rng));
    head.aux_b = store.add("head.b_aux", Tensor<T>::zeros({1}));
  }
  return m;
}

// The filter matrix node for filtered block slot k, or nothing in disabled mode.
template <typename T>
std::optional<Var> filter_matrix_var(Tape<T>& tape, const Model<T>& m, int slot) {
  switch (m.cfg.mode) {
    case AblationMode::NoFilter:
      return std::nullopt;
    case AblationMode::UnconstrainedNoFusion:
      return tape.param(m.store, m.head.filter_matrix);
    case AblationMode::ConstrainedNoFusion:
    case AblationMode::FusionSharedFilter:
      return tape.filter_from_scalars(tape.param(m.store, m.head.filter_alpha[0]),
                                      tape.param(m.store, m.head.filter_beta[0]));
    case AblationMode::FusionPerBlockFilter:
      return tape.filter_from_scalars(
          tape.param(m.store, m.head.filter_alpha[static_cast<size_t>(slot)]),
          tape.param(m.store, m.head.filter_beta[static_cast<size_t>(slot)]));
  }
  throw ContractError("unknown ablation mode");
}

// Encodes all four options with shared weights; result[k] is the 4xd stack
// of pooled block-k outputs.
template <typename T>
std::vector<Var> encode_option_set_tape(Tape<T>& tape, const Model<T>& m,
                                        const McqaInstance& inst) {
  inst.validate();
  const auto& cfg = m.cfg.encoder;
  std::vector<std::vector<Var>> per_option;  // [4][blocks]
  per_option.reserve(4);
  for (int i = 0; i < 4; ++i) {
    PackedInput packed =
        pack(inst.context, inst.question, inst.options[static_cast<size_t>(i)], cfg.max_len);
    per_option.push_back(encode_tape(tape, m.store, m.enc, cfg, packed));
  }
  std::vector<Var> stacks;
  stacks.reserve(static_cast<size_t>(cfg.blocks));
  for (int k = 0; k < cfg.blocks; ++k) {
    std::vector<Var> rows;
    rows.reserve(4);
    for (int i = 0; i < 4; ++i) rows.push_back(per_option[static_cast<size_t>(i)][static_cast<size_t>(k)]);
    stacks.push_back(tape.stack_rows(rows));
  }
  return stacks;
}

// Pooled final-block vector of [question; option] with no context, sharing
// the encoder weights. The auxiliary scoring group.
template <typename T>
Var encode_qo_tape(Tape<T>& tape, const Model<T>& m, const std::vector<int>& question,
                   const std::vector<int>& option) {
  PackedInput packed = pack({}, question, option, m.cfg.encoder.max_len);
  return encode_tape(tape, m.store, m.enc, m.cfg.encoder, packed).back();
}

// Full forward pass: encoder stacks -> per-block filters -> fusion (or the
// final filtered block) -> linear scoring, plus the auxiliary group when
// enabled. Returns the {4} logit node.
template <typename T>
Var model_logits_tape(Tape<T>& tape, const Model<T>& m, const McqaInstance& inst) {
  std::vector<Var> stacks = encode_option_set_tape(tape, m, inst);

  Var fused{-1};
  if (uses_fusion(m.cfg.mode)) {
    std::vector<Var> filtered;
    filtered.reserve(stacks.size());
    for (int k = 0; k < static_cast<int>(stacks.size()); ++k) {
      filtered.push_back(filter_block_tape(
          tape, stacks[static_cast<size_t>(k)], filter_matrix_var(tape, m, k),
          tape.param(m.store, m.head.filter_ln_gain[static_cast<size_t>(k)]),
          tape.param(m.store, m.head.filter_ln_bias[static_cast<size_t>(k)])));
    }
    fused = tape.weighted_sum(filtered, tape.param(m.store, m.head.fusion_weights),
                              tape.param(m.store, m.head.fusion_bias));
  } else {
    fused = filter_block_tape(tape, stacks.back(), filter_matrix_var(tape, m, 0),
                              tape.param(m.store, m.head.filter_ln_gain[0]),
                              tape.param(m.store, m.head.filter_ln_bias[0]));
  }

  Var logits = tape.linear_rows(fused, tape.param(m.store, m.head.score_w),
                                tape.param(m.store, m.head.score_b));
  if (m.cfg.aux_group) {
    std::vector<Var> aux_rows;
    aux_rows.reserve(4);
    for (int i = 0; i < 4; ++i)
      aux_rows.push_back(encode_qo_tape(tape, m, inst.question, inst.options[static_cast<size_t>(i)]));
    Var aux_logits = tape.linear_rows(tape.stack_rows(aux_rows),
                                      tape.param(m.store, m.head.aux_w),
                                      tape.param(m.store, m.head.aux_b));
    logits = tape.add(logits, aux_logits);
  }
  return logits;
}

template <typename T>
Var model_loss_tape(Tape<T>& tape, const Model<T>& m, const McqaInstance& inst) {
  return tape.softmax_cross_entropy(model_logits_tape(tape, m, inst), inst.label);
}

// Forward-only logits on a fresh tape.
template <typename T>
Tensor<T> model_logits(const Model<T>& m, const McqaInstance& inst) {
  Tape<T> tape;
  tape.disable_grads();
  return tape.val(model_logits_tape(tape, m, inst));
}

// Ties broken toward the lowest index.
template <typename T>
int argmax_logits(const Tensor<T>& logits) {
  int best = 0;
  for (int i = 1; i < logits.numel(); ++i)
    if (logits.data[i] > logits.data[best]) best = i;
  return best;
}

template <typename T>
int predict(const Model<T>& m, const McqaInstance& inst) {
  return argmax_logits(model_logits(m, inst));
}

}  // namespace evf
