#pragma once

#include <bit>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "evf/config.hpp"
#include "evf/train.hpp"

namespace evf {

// A checkpoint is a directory:
//   manifest.json  format tag, precision, step, config echo, eval history,
//                  and an ordered parameter index (name, shape, offset).
//   params.bin     raw little-endian parameter values in index order.
inline constexpr const char* kCheckpointFormat = "evf.checkpoint";
inline constexpr int kCheckpointVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "params.bin is little-endian; big-endian hosts are unsupported");

template <typename T>
struct Checkpoint {
  Model<T> model;
  TrainConfig config;
  int step = 0;
  std::vector<EvalPoint> evals;
};

namespace detail {

inline const char* precision_name_for(float) { return "f32"; }
inline const char* precision_name_for(double) { return "f64"; }

}  // namespace detail

template <typename T>
void save_checkpoint(const std::string& dir, const Model<T>& model, const TrainConfig& cfg,
                     int step, const std::vector<EvalPoint>& evals) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);

  nlohmann::json manifest;
  manifest["format"] = kCheckpointFormat;
  manifest["version"] = kCheckpointVersion;
  manifest["precision"] = detail::precision_name_for(T{});
  manifest["step"] = step;
  manifest["config"] = nlohmann::json::parse(config_to_json(cfg));
  nlohmann::json eval_list = nlohmann::json::array();
  for (const auto& e : evals) eval_list.push_back({{"step", e.step}, {"accuracy", e.accuracy}});
  manifest["evals"] = eval_list;

  nlohmann::json index = nlohmann::json::array();
  int64_t offset = 0;
  for (int p = 0; p < model.store.size(); ++p) {
    const auto& param = model.store[p];
    index.push_back({{"name", param.name},
                     {"shape", param.value.shape},
                     {"offset", offset},
                     {"count", param.value.numel()}});
    offset += param.value.numel();
  }
  manifest["params"] = index;

  {
    std::ofstream out(fs::path(dir) / "manifest.json", std::ios::binary);
    if (!out) throw TrainError("checkpoint: cannot write manifest.json in " + dir);
    out << manifest.dump(2) << "\n";
  }
  {
    std::ofstream out(fs::path(dir) / "params.bin", std::ios::binary);
    if (!out) throw TrainError("checkpoint: cannot write params.bin in " + dir);
    for (int p = 0; p < model.store.size(); ++p) {
      const auto& value = model.store[p].value;
      out.write(reinterpret_cast<const char*>(value.data.data()),
                static_cast<std::streamsize>(value.data.size() * sizeof(T)));
    }
    if (!out) throw TrainError("checkpoint: short write to params.bin in " + dir);
  }
}

// Reads just the config echo, for callers that dispatch on precision before
// instantiating a model.
inline TrainConfig load_checkpoint_config(const std::string& dir) {
  namespace fs = std::filesystem;
  const auto path = fs::path(dir) / "manifest.json";
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path.string(), 0, "cannot open manifest.json");
  std::stringstream buf;
  buf << in.rdbuf();
  auto manifest = nlohmann::json::parse(buf.str(), nullptr, false);
  if (manifest.is_discarded()) throw ParseError(path.string(), 0, "malformed manifest.json");
  if (manifest.value("format", "") != kCheckpointFormat)
    throw ParseError(path.string(), 0, "not a checkpoint manifest");
  if (manifest.value("version", -1) != kCheckpointVersion)
    throw ParseError(path.string(), 0, "unsupported checkpoint version");
  if (!manifest.contains("config"))
    throw ParseError(path.string(), 0, "manifest has no config echo");
  return config_from_json(manifest["config"].dump());
}

inline std::string checkpoint_precision(const std::string& dir) {
  namespace fs = std::filesystem;
  const auto path = fs::path(dir) / "manifest.json";
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path.string(), 0, "cannot open manifest.json");
  std::stringstream buf;
  buf << in.rdbuf();
  auto manifest = nlohmann::json::parse(buf.str(), nullptr, false);
  if (manifest.is_discarded()) throw ParseError(path.string(), 0, "malformed manifest.json");
  return manifest.value("precision", "");
}

template <typename T>
Checkpoint<T> load_checkpoint(const std::string& dir) {
  namespace fs = std::filesystem;
  const auto manifest_path = fs::path(dir) / "manifest.json";
  std::ifstream in(manifest_path, std::ios::binary);
  if (!in) throw ParseError(manifest_path.string(), 0, "cannot open manifest.json");
  std::stringstream buf;
  buf << in.rdbuf();
  auto manifest = nlohmann::json::parse(buf.str(), nullptr, false);
  if (manifest.is_discarded())
    throw ParseError(manifest_path.string(), 0, "malformed manifest.json");
  if (manifest.value("format", "") != kCheckpointFormat)
    throw ParseError(manifest_path.string(), 0, "not a checkpoint manifest");
  if (manifest.value("version", -1) != kCheckpointVersion)
    throw ParseError(manifest_path.string(), 0, "unsupported checkpoint version");
  const std::string want = detail::precision_name_for(T{});
  if (manifest.value("precision", "") != want)
    throw ContractError("checkpoint precision is " + manifest.value("precision", std::string("?")) +
                        " but " + want + " was requested");

  Checkpoint<T> ckpt;
  ckpt.config = config_from_json(manifest["config"].dump());
  ckpt.step = manifest.value("step", 0);
  if (manifest.contains("evals"))
    for (const auto& e : manifest["evals"])
      ckpt.evals.push_back({e.value("step", 0), e.value("accuracy", 0.0)});
  ckpt.model = init_model<T>(ckpt.config.model_config(), ckpt.config.seed);

  const auto& index = manifest["params"];
  if (static_cast<int>(index.size()) != ckpt.model.store.size())
    throw ParseError(manifest_path.string(), 0,
                     "parameter index has " + std::to_string(index.size()) + " entries, model has " +
                         std::to_string(ckpt.model.store.size()));
  int64_t offset = 0;
  for (int p = 0; p < ckpt.model.store.size(); ++p) {
    const auto& entry = index[static_cast<size_t>(p)];
    auto& param = ckpt.model.store[p];
    if (entry.value("name", "") != param.name)
      throw ParseError(manifest_path.string(), 0,
                       "parameter " + std::to_string(p) + " is \"" + entry.value("name", "") +
                           "\", expected \"" + param.name + "\"");
    const auto shape = entry.value("shape", std::vector<int>{});
    if (shape != param.value.shape)
      throw ParseError(manifest_path.string(), 0, "shape mismatch for parameter " + param.name);
    if (entry.value("offset", int64_t{-1}) != offset)
      throw ParseError(manifest_path.string(), 0, "non-contiguous offset for parameter " + param.name);
    offset += param.value.numel();
  }

  const auto bin_path = fs::path(dir) / "params.bin";
  std::ifstream bin(bin_path, std::ios::binary);
  if (!bin) throw ParseError(bin_path.string(), 0, "cannot open params.bin");
  for (int p = 0; p < ckpt.model.store.size(); ++p) {
    auto& value = ckpt.model.store[p].value;
    bin.read(reinterpret_cast<char*>(value.data.data()),
             static_cast<std::streamsize>(value.data.size() * sizeof(T)));
    if (bin.gcount() != static_cast<std::streamsize>(value.data.size() * sizeof(T)))
      throw ParseError(bin_path.string(), 0, "params.bin is shorter than the manifest index");
  }
  char extra;
  if (bin.read(&extra, 1))
    throw ParseError(bin_path.string(), 0, "params.bin is longer than the manifest index");
  return ckpt;
}

}  // namespace evf
