#include "evf/dataset_io.hpp"

#include <fstream>

#include <json.hpp>

namespace evf {

namespace {

using nlohmann::json;

constexpr const char* kFormatName = "evf.mcqa.dataset";
constexpr int kFormatVersion = 1;

json instance_to_json(const McqaInstance& inst) {
  json j;
  j["context"] = inst.context;
  j["question"] = inst.question;
  j["options"] = inst.options;
  j["label"] = inst.label;
  j["evidence_mask"] = inst.evidence_mask;
  return j;
}

McqaInstance instance_from_json(const json& j, const std::string& path, int line) {
  McqaInstance inst;
  try {
    j.at("context").get_to(inst.context);
    j.at("question").get_to(inst.question);
    const auto& opts = j.at("options");
    if (!opts.is_array() || opts.size() != 4)
      throw ParseError(path, line, "expected exactly 4 options");
    for (size_t i = 0; i < 4; ++i) opts[i].get_to(inst.options[i]);
    j.at("label").get_to(inst.label);
    j.at("evidence_mask").get_to(inst.evidence_mask);
  } catch (const json::exception& e) {
    throw ParseError(path, line, e.what());
  }
  try {
    inst.validate();
  } catch (const ContractError& e) {
    throw ParseError(path, line, e.what());
  }
  return inst;
}

}  // namespace

void save_dataset(const std::vector<McqaInstance>& instances, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  json header;
  header["format"] = kFormatName;
  header["version"] = kFormatVersion;
  header["count"] = instances.size();
  out << header.dump() << "\n";
  for (const auto& inst : instances) out << instance_to_json(inst).dump() << "\n";
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::vector<McqaInstance> load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path, 0, "cannot open for reading");

  std::string line;
  if (!std::getline(in, line)) throw ParseError(path, 1, "missing header record");
  json header = json::parse(line, nullptr, false);
  if (header.is_discarded() || !header.is_object())
    throw ParseError(path, 1, "malformed header record");
  if (header.value("format", "") != kFormatName)
    throw ParseError(path, 1, "unrecognized format field");
  if (header.value("version", -1) != kFormatVersion)
    throw ParseError(path, 1, "unsupported version");
  if (!header.contains("count") || !header["count"].is_number_unsigned())
    throw ParseError(path, 1, "header is missing the record count");
  const size_t expected = header["count"].get<size_t>();

  std::vector<McqaInstance> instances;
  instances.reserve(expected);
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() && in.eof()) break;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded())
      throw ParseError(path, line_no, "malformed record (truncated file?)");
    instances.push_back(instance_from_json(j, path, line_no));
  }
  if (instances.size() != expected)
    throw ParseError(path, line_no + 1,
                     "expected " + std::to_string(expected) + " records, found " +
                         std::to_string(instances.size()));
  return instances;
}

}  // namespace evf
