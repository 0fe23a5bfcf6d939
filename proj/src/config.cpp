#include "evf/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace evf {
namespace {

using nlohmann::json;

void reject_unknown_keys(const json& j, const std::set<std::string>& allowed,
                         const std::string& where) {
  for (const auto& item : j.items())
    if (!allowed.count(item.key()))
      throw ContractError("config: unknown key \"" + item.key() + "\" in " + where);
}

json encoder_to_json(const EncoderConfig& e) {
  return json{{"blocks", e.blocks},
              {"width", e.width},
              {"heads", e.heads},
              {"vocab_size", e.vocab_size},
              {"max_len", e.max_len},
              {"ffn_dim", e.ffn_dim},
              {"pooling", e.pooling == Pooling::FirstToken ? "first_token" : "mean"},
              {"init_std", e.init_std}};
}

EncoderConfig encoder_from_json(const json& j) {
  reject_unknown_keys(j, {"blocks", "width", "heads", "vocab_size", "max_len", "ffn_dim",
                          "pooling", "init_std"},
                      "encoder");
  EncoderConfig e;
  e.blocks = j.value("blocks", e.blocks);
  e.width = j.value("width", e.width);
  e.heads = j.value("heads", e.heads);
  e.vocab_size = j.value("vocab_size", e.vocab_size);
  e.max_len = j.value("max_len", e.max_len);
  e.ffn_dim = j.value("ffn_dim", e.ffn_dim);
  if (j.contains("pooling")) {
    const std::string p = j["pooling"].get<std::string>();
    if (p == "first_token") e.pooling = Pooling::FirstToken;
    else if (p == "mean") e.pooling = Pooling::Mean;
    else throw ContractError("config: unknown pooling: " + p);
  }
  e.init_std = j.value("init_std", e.init_std);
  return e;
}

json gen_to_json(const GenSpec& g) {
  return json{{"n_sentences", g.n_sentences},
              {"n_evidence", g.n_evidence},
              {"sent_len_min", g.sent_len_min},
              {"sent_len_max", g.sent_len_max},
              {"signal_tokens_per_option", g.signal_tokens_per_option},
              {"neutral_tokens", g.neutral_tokens},
              {"question_len", g.question_len},
              {"option_len", g.option_len},
              {"distractor_relevance",
               g.distractor_relevance == DistractorRelevance::UniformRelevant ? "uniform_relevant"
                                                                              : "irrelevant"},
              {"relevant_distractors", g.relevant_distractors},
              {"seed", g.seed}};
}

GenSpec gen_from_json(const json& j) {
  reject_unknown_keys(j, {"n_sentences", "n_evidence", "sent_len_min", "sent_len_max",
                          "signal_tokens_per_option", "neutral_tokens", "question_len",
                          "option_len", "distractor_relevance", "relevant_distractors", "seed"},
                      "gen");
  GenSpec g;
  g.n_sentences = j.value("n_sentences", g.n_sentences);
  g.n_evidence = j.value("n_evidence", g.n_evidence);
  g.sent_len_min = j.value("sent_len_min", g.sent_len_min);
  g.sent_len_max = j.value("sent_len_max", g.sent_len_max);
  g.signal_tokens_per_option = j.value("signal_tokens_per_option", g.signal_tokens_per_option);
  g.neutral_tokens = j.value("neutral_tokens", g.neutral_tokens);
  g.question_len = j.value("question_len", g.question_len);
  g.option_len = j.value("option_len", g.option_len);
  if (j.contains("distractor_relevance")) {
    const std::string d = j["distractor_relevance"].get<std::string>();
    if (d == "uniform_relevant") g.distractor_relevance = DistractorRelevance::UniformRelevant;
    else if (d == "irrelevant") g.distractor_relevance = DistractorRelevance::Irrelevant;
    else throw ContractError("config: unknown distractor_relevance: " + d);
  }
  g.relevant_distractors = j.value("relevant_distractors", g.relevant_distractors);
  g.seed = j.value("seed", g.seed);
  return g;
}

}  // namespace

std::string config_to_json(const TrainConfig& cfg) {
  json j{{"batch_size", cfg.batch_size},
         {"learning_rate", cfg.learning_rate},
         {"warmup_fraction", cfg.warmup_fraction},
         {"total_steps", cfg.total_steps},
         {"seed", cfg.seed},
         {"ablation_mode", to_string(cfg.ablation_mode)},
         {"aux_group", cfg.aux_group},
         {"encoder", encoder_to_json(cfg.encoder)},
         {"train_data", cfg.train_data},
         {"eval_data", cfg.eval_data},
         {"gen_train_count", cfg.gen_train_count},
         {"gen_eval_count", cfg.gen_eval_count},
         {"precision", to_string(cfg.precision)},
         {"eval_every", cfg.eval_every}};
  if (cfg.gen) j["gen"] = gen_to_json(*cfg.gen);
  return j.dump(2);
}

TrainConfig config_from_json(const std::string& text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw ContractError("config: malformed JSON");
  if (!j.is_object()) throw ContractError("config: top level must be a JSON object");
  reject_unknown_keys(j, {"batch_size", "learning_rate", "warmup_fraction", "total_steps", "seed",
                          "ablation_mode", "aux_group", "encoder", "train_data", "eval_data",
                          "gen", "gen_train_count", "gen_eval_count", "precision", "eval_every"},
                      "top level");
  TrainConfig cfg;
  try {
    cfg.batch_size = j.value("batch_size", cfg.batch_size);
    cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
    cfg.warmup_fraction = j.value("warmup_fraction", cfg.warmup_fraction);
    cfg.total_steps = j.value("total_steps", cfg.total_steps);
    cfg.seed = j.value("seed", cfg.seed);
    if (j.contains("ablation_mode"))
      cfg.ablation_mode = ablation_mode_from_string(j["ablation_mode"].get<std::string>());
    cfg.aux_group = j.value("aux_group", cfg.aux_group);
    if (j.contains("encoder")) cfg.encoder = encoder_from_json(j["encoder"]);
    cfg.train_data = j.value("train_data", cfg.train_data);
    cfg.eval_data = j.value("eval_data", cfg.eval_data);
    if (j.contains("gen")) cfg.gen = gen_from_json(j["gen"]);
    cfg.gen_train_count = j.value("gen_train_count", cfg.gen_train_count);
    cfg.gen_eval_count = j.value("gen_eval_count", cfg.gen_eval_count);
    if (j.contains("precision"))
      cfg.precision = precision_from_string(j["precision"].get<std::string>());
    cfg.eval_every = j.value("eval_every", cfg.eval_every);
  } catch (const json::exception& e) {
    throw ContractError(std::string("config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

TrainConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path, 0, "cannot open config file");
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return config_from_json(buf.str());
  } catch (const ContractError& e) {
    throw ParseError(path, 0, e.what());
  }
}

}  // namespace evf
