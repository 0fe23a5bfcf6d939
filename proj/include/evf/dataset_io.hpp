#pragma once

#include <string>
#include <vector>

#include "evf/synth.hpp"

namespace evf {

// Line-delimited JSON. Line 1 is a header record carrying the format name,
// version and instance count; every following line is one instance with
// fields context, question, options, label, evidence_mask.
void save_dataset(const std::vector<McqaInstance>& instances, const std::string& path);

// Throws ParseError naming the failing line on any malformed or truncated
// input, including a record count that disagrees with the header.
std::vector<McqaInstance> load_dataset(const std::string& path);

}  // namespace evf
