// Command-line front end: data generation, training, evaluation, and the
// diagnostic reports (shuffle audit, filter inspection, gradient check,
// ablation suite).

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "evf/audit.hpp"
#include "evf/checkpoint.hpp"
#include "evf/config.hpp"
#include "evf/dataset_io.hpp"

namespace {

using namespace evf;

// Runs f with a float or double tag according to the requested precision.
template <typename F>
int with_precision(Precision p, F&& f) {
  if (p == Precision::F32) return f(float{});
  return f(double{});
}

TrainConfig resolve_config(const std::string& config_path, std::optional<uint64_t> seed,
                           std::optional<std::string> precision) {
  TrainConfig cfg = config_path.empty() ? TrainConfig{} : load_config_file(config_path);
  if (seed) cfg.seed = *seed;
  if (precision) cfg.precision = precision_from_string(*precision);
  cfg.validate();
  return cfg;
}

enum class Split { Train, Eval };

// Datasets come from the configured path when one is set, otherwise from the
// generator. Generated eval data always uses a seed distinct from train data.
std::vector<McqaInstance> load_or_generate(const TrainConfig& cfg, Split split) {
  const std::string& path = split == Split::Train ? cfg.train_data : cfg.eval_data;
  if (!path.empty()) return load_dataset(path);
  GenSpec g = cfg.gen.value_or(GenSpec{});
  if (!cfg.gen) g.seed = Rng::derive(cfg.seed, 0xda7a);
  if (split == Split::Eval) g.seed = Rng::derive(g.seed, 0xe7a1);
  return generate_dataset(g, split == Split::Train ? cfg.gen_train_count : cfg.gen_eval_count);
}

int cmd_gen_data(const std::string& config_path, std::optional<uint64_t> seed,
                 const std::string& out, int count) {
  TrainConfig cfg = resolve_config(config_path, seed, std::nullopt);
  GenSpec g = cfg.gen.value_or(GenSpec{});
  if (seed) g.seed = *seed;
  g.validate();
  const auto data = generate_dataset(g, count);
  save_dataset(data, out);
  std::cout << "wrote " << data.size() << " instances to " << out << "\n";
  return 0;
}

int cmd_train(const std::string& config_path, std::optional<uint64_t> seed,
              std::optional<std::string> precision, const std::string& out) {
  TrainConfig cfg = resolve_config(config_path, seed, precision);
  return with_precision(cfg.precision, [&](auto tag) {
    using T = decltype(tag);
    const auto train_data = load_or_generate(cfg, Split::Train);
    const auto eval_data = load_or_generate(cfg, Split::Eval);
    Model<T> model = init_model<T>(cfg.model_config(), cfg.seed);

    std::filesystem::create_directories(out);
    std::ofstream metrics(std::filesystem::path(out) / "metrics.csv");
    if (!metrics) throw TrainError("cannot write metrics.csv in " + out);
    const TrainResult result = train_model(model, cfg, train_data, eval_data, &metrics);
    save_checkpoint(out, model, cfg, result.steps, result.evals);

    std::cout << "trained " << result.steps << " steps (" << to_string(cfg.ablation_mode)
              << ", seed " << cfg.seed << ")\n";
    if (!result.evals.empty())
      std::cout << "final eval accuracy: " << format_double(result.evals.back().accuracy) << "\n";
    std::cout << "checkpoint: " << out << "\n";
    return 0;
  });
}

int cmd_eval(const std::string& ckpt, const std::string& data_path) {
  const std::string precision = checkpoint_precision(ckpt);
  return with_precision(precision_from_string(precision), [&](auto tag) {
    using T = decltype(tag);
    Checkpoint<T> loaded = load_checkpoint<T>(ckpt);
    std::vector<McqaInstance> data;
    if (!data_path.empty()) data = load_dataset(data_path);
    else data = load_or_generate(loaded.config, Split::Eval);
    std::cout << "accuracy: " << format_double(evaluate(loaded.model, data)) << " (" << data.size()
              << " instances)\n";
    return 0;
  });
}

int cmd_audit_shuffle(const std::string& ckpt, const std::string& data_path, int n_shuffles,
                      uint64_t seed) {
  const std::string precision = checkpoint_precision(ckpt);
  return with_precision(precision_from_string(precision), [&](auto tag) {
    using T = decltype(tag);
    Checkpoint<T> loaded = load_checkpoint<T>(ckpt);
    std::vector<McqaInstance> data;
    if (!data_path.empty()) data = load_dataset(data_path);
    else data = load_or_generate(loaded.config, Split::Eval);
    std::vector<uint64_t> seeds;
    for (int i = 0; i < n_shuffles; ++i) seeds.push_back(Rng::derive(seed, static_cast<uint64_t>(i)));
    std::cout << format_shuffle_report(shuffle_audit(loaded.model, data, seeds));
    return 0;
  });
}

int cmd_inspect_filter(const std::string& ckpt) {
  const std::string precision = checkpoint_precision(ckpt);
  return with_precision(precision_from_string(precision), [&](auto tag) {
    using T = decltype(tag);
    Checkpoint<T> loaded = load_checkpoint<T>(ckpt);
    std::cout << format_filter_report(inspect_filter(loaded.model));
    return 0;
  });
}

int cmd_gradcheck(std::optional<std::string> precision, uint64_t seed, int n_seeds) {
  const Precision p = precision ? precision_from_string(*precision) : Precision::F64;
  return with_precision(p, [&](auto tag) {
    using T = decltype(tag);
    ModelConfig mc;
    mc.encoder.blocks = 2;
    mc.encoder.width = 8;
    mc.encoder.heads = 2;
    mc.encoder.vocab_size = 32;
    mc.encoder.max_len = 24;
    mc.encoder.ffn_dim = 16;
    const double h = default_gradcheck_h(p);
    const double floor = default_gradcheck_floor(p);
    const double tol = default_gradcheck_tolerance(p);

    GradcheckReport worst;
    for (int i = 0; i < n_seeds; ++i) {
      const uint64_t s = seed + static_cast<uint64_t>(i);
      const GradcheckReport r = gradcheck_model<T>(mc, s, h, floor);
      std::cout << "seed " << s << ": max relative error " << format_double(r.max_rel_error)
                << " (worst: " << r.worst_param << ")\n";
      if (r.max_rel_error > worst.max_rel_error) worst = r;
    }
    std::cout << format_gradcheck_report(worst, tol);
    return worst.max_rel_error < tol ? 0 : 1;
  });
}

int cmd_ablate(const std::string& config_path, std::optional<uint64_t> seed,
               std::optional<std::string> precision, const std::string& out) {
  TrainConfig cfg = resolve_config(config_path, seed, precision);
  return with_precision(cfg.precision, [&](auto tag) {
    using T = decltype(tag);
    const auto train_data = load_or_generate(cfg, Split::Train);
    const auto eval_data = load_or_generate(cfg, Split::Eval);
    const auto rows = run_ablation_suite<T>(cfg, train_data, eval_data, &std::cerr);
    const std::string table = format_ablation_table(rows);
    std::cout << table;
    if (!out.empty()) {
      std::ofstream f(out);
      if (!f) throw TrainError("cannot write " + out);
      f << table;
    }
    return 0;
  });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"evidence-filter toy: constrained per-block option filtering for 4-way QA"};
  app.require_subcommand(1);

  std::string config_path, out, ckpt, data_path;
  std::optional<uint64_t> seed;
  std::optional<std::string> precision;
  int count = 2000, n_shuffles = 3, n_seeds = 1;
  uint64_t audit_seed = 1;

  auto add_common = [&](CLI::App* cmd, bool with_precision_flag) {
    cmd->add_option("--config", config_path, "JSON run configuration");
    cmd->add_option("--seed", seed, "override the configured seed");
    if (with_precision_flag)
      cmd->add_option("--precision", precision, "f32 or f64")
          ->check(CLI::IsMember({"f32", "f64"}));
  };

  auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset");
  add_common(gen, false);
  gen->add_option("--out", out, "output JSONL path")->required();
  gen->add_option("--count", count, "number of instances");

  auto* train = app.add_subcommand("train", "train a model and write a checkpoint");
  add_common(train, true);
  train->add_option("--out", out, "checkpoint directory")->required();

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  eval->add_option("--ckpt", ckpt, "checkpoint directory")->required();
  eval->add_option("--data", data_path, "dataset path (default: config's eval data)");

  auto* audit = app.add_subcommand("audit-shuffle", "option-shuffle consistency audit");
  audit->add_option("--ckpt", ckpt, "checkpoint directory")->required();
  audit->add_option("--data", data_path, "dataset path (default: config's eval data)");
  audit->add_option("--n-shuffles", n_shuffles, "number of shuffle seeds");
  audit->add_option("--seed", audit_seed, "base seed for the shuffles");

  auto* inspect = app.add_subcommand("inspect-filter", "report per-block filter coefficients");
  inspect->add_option("--ckpt", ckpt, "checkpoint directory")->required();

  auto* gradcheck = app.add_subcommand("gradcheck", "compare gradients to finite differences");
  gradcheck->add_option("--precision", precision, "f32 or f64 (default f64)")
      ->check(CLI::IsMember({"f32", "f64"}));
  gradcheck->add_option("--seed", audit_seed, "first seed");
  gradcheck->add_option("--seeds", n_seeds, "number of consecutive seeds");

  auto* ablate = app.add_subcommand("ablate", "train every architecture variant and tabulate");
  add_common(ablate, true);
  ablate->add_option("--out", out, "also write the table to this file");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_gen_data(config_path, seed, out, count);
    if (train->parsed()) return cmd_train(config_path, seed, precision, out);
    if (eval->parsed()) return cmd_eval(ckpt, data_path);
    if (audit->parsed()) return cmd_audit_shuffle(ckpt, data_path, n_shuffles, audit_seed);
    if (inspect->parsed()) return cmd_inspect_filter(ckpt);
    if (gradcheck->parsed()) return cmd_gradcheck(precision, audit_seed, n_seeds);
    if (ablate->parsed()) return cmd_ablate(config_path, seed, precision, out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
