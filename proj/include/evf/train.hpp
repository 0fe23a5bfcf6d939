#pragma once

#include <charconv>
#include <cmath>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "evf/model.hpp"
#include "evf/synth.hpp"

namespace evf {

enum class Precision { F32, F64 };

inline std::string to_string(Precision p) { return p == Precision::F32 ? "f32" : "f64"; }
inline Precision precision_from_string(const std::string& s) {
  if (s == "f32") return Precision::F32;
  if (s == "f64") return Precision::F64;
  throw ContractError("unknown precision: " + s + " (expected f32 or f64)");
}

struct TrainConfig {
  int batch_size = 32;
  double learning_rate = 1e-3;
  double warmup_fraction = 0.1;
  int total_steps = 2000;
  uint64_t seed = 0;
  AblationMode ablation_mode = AblationMode::FusionPerBlockFilter;
  bool aux_group = true;
  EncoderConfig encoder;
  std::string train_data;         // dataset path; empty means generate
  std::string eval_data;
  std::optional<GenSpec> gen;     // generator settings when paths are absent
  int gen_train_count = 2000;
  int gen_eval_count = 500;
  Precision precision = Precision::F32;
  int eval_every = 100;

  void validate() const {
    if (batch_size < 1) throw ContractError("train: batch_size must be >= 1");
    if (warmup_fraction < 0 || warmup_fraction > 1)
      throw ContractError("train: warmup_fraction must be in [0,1]");
    if (total_steps < 0) throw ContractError("train: total_steps must be >= 0");
    if (learning_rate <= 0) throw ContractError("train: learning_rate must be positive");
    encoder.validate();
  }

  ModelConfig model_config() const {
    ModelConfig mc;
    mc.encoder = encoder;
    mc.mode = ablation_mode;
    mc.aux_group = aux_group;
    return mc;
  }
};

// Piecewise-linear schedule: 0 at step 0, peak at the end of warmup,
// 0 again at total_steps.
inline double lr_at(const TrainConfig& cfg, double step) {
  const double total = cfg.total_steps;
  if (total <= 0) return 0;
  const double warm = cfg.warmup_fraction * total;
  if (step >= total) return 0;
  if (step < warm) return cfg.learning_rate * step / warm;
  if (total == warm) return cfg.learning_rate;
  return cfg.learning_rate * (total - step) / (total - warm);
}

// Adaptive-moment optimizer (beta1=0.9, beta2=0.999, eps=1e-8) with bias
// correction. Moments are kept in the parameter precision.
template <typename T>
class AdamOptimizer {
 public:
  explicit AdamOptimizer(const ParamStore<T>& store) {
    m_.reserve(static_cast<size_t>(store.size()));
    v_.reserve(static_cast<size_t>(store.size()));
    for (int i = 0; i < store.size(); ++i) {
      m_.push_back(Tensor<T>::zeros(store[i].value.shape));
      v_.push_back(Tensor<T>::zeros(store[i].value.shape));
    }
  }

  void step(ParamStore<T>& store, double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(0.9, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(0.999, static_cast<double>(t_));
    for (int p = 0; p < store.size(); ++p) {
      auto& value = store[p].value;
      const auto& grad = store[p].grad;
      auto& m = m_[static_cast<size_t>(p)];
      auto& v = v_[static_cast<size_t>(p)];
      for (int i = 0; i < value.numel(); ++i) {
        const double g = static_cast<double>(grad.data[i]);
        const double mi = 0.9 * static_cast<double>(m.data[i]) + 0.1 * g;
        const double vi = 0.999 * static_cast<double>(v.data[i]) + 0.001 * g * g;
        m.data[i] = static_cast<T>(mi);
        v.data[i] = static_cast<T>(vi);
        const double update = lr * (mi / bc1) / (std::sqrt(vi / bc2) + 1e-8);
        value.data[i] = static_cast<T>(static_cast<double>(value.data[i]) - update);
      }
    }
  }

 private:
  std::vector<Tensor<T>> m_, v_;
  int64_t t_ = 0;
};

struct EvalPoint {
  int step;
  double accuracy;
};

struct TrainResult {
  std::vector<double> losses;       // batch loss per step, pre-update
  std::vector<EvalPoint> evals;
  int steps = 0;
};

// Fraction of instances whose top logit index equals the label.
template <typename T>
double evaluate(const Model<T>& m, const std::vector<McqaInstance>& data) {
  if (data.empty()) throw ContractError("evaluate: empty dataset");
  int correct = 0;
  for (const auto& inst : data)
    if (predict(m, inst) == inst.label) ++correct;
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

// Trains a fresh model under cfg. Metrics rows (step,loss,lr,eval_accuracy)
// go to metrics_out when given; eval_accuracy is filled on eval steps only
// and reflects the parameters after that step's update.
template <typename T>
TrainResult train_model(Model<T>& model, const TrainConfig& cfg,
                        const std::vector<McqaInstance>& train_data,
                        const std::vector<McqaInstance>& eval_data,
                        std::ostream* metrics_out = nullptr) {
  cfg.validate();
  if (train_data.empty()) throw ContractError("train: empty dataset");

  AdamOptimizer<T> opt(model.store);
  Rng batch_rng(Rng::derive(cfg.seed, 0xba7c4));
  TrainResult result;
  if (metrics_out) (*metrics_out) << "step,loss,lr,eval_accuracy\n";

  const T inv_batch = T(1) / static_cast<T>(cfg.batch_size);
  for (int step = 0; step < cfg.total_steps; ++step) {
    model.store.zero_grads();
    double batch_loss = 0;
    for (int b = 0; b < cfg.batch_size; ++b) {
      const auto& inst =
          train_data[static_cast<size_t>(batch_rng.uniform_int(0, static_cast<int>(train_data.size()) - 1))];
      Tape<T> tape;
      Var loss = model_loss_tape(tape, model, inst);
      batch_loss += static_cast<double>(tape.val(loss).item());
      tape.backward(loss);
      tape.accumulate_param_grads(model.store);
    }
    batch_loss /= cfg.batch_size;
    if (!std::isfinite(batch_loss))
      throw TrainError("non-finite loss at step " + std::to_string(step));
    for (int p = 0; p < model.store.size(); ++p)
      for (auto& g : model.store[p].grad.data) g *= inv_batch;

    const double lr = lr_at(cfg, step);
    opt.step(model.store, lr);
    result.losses.push_back(batch_loss);
    result.steps = step + 1;

    std::optional<double> acc;
    const bool last = step + 1 == cfg.total_steps;
    if (!eval_data.empty() && cfg.eval_every > 0 &&
        ((step + 1) % cfg.eval_every == 0 || last)) {
      acc = evaluate(model, eval_data);
      result.evals.push_back({step + 1, *acc});
    }
    if (metrics_out) {
      (*metrics_out) << step << "," << format_double(batch_loss) << "," << format_double(lr)
                     << "," << (acc ? format_double(*acc) : "") << "\n";
    }
  }
  return result;
}

}  // namespace evf
