#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dhtsim/sim/scenario.hpp"

namespace dhtsim::cli {

// Flat key=value configuration text: one pair per line, '#' comments.
using KvMap = std::map<std::string, std::string>;

KvMap parse_kv_text(const std::string& text);
KvMap load_kv_file(const std::string& path);

// Applies "key=value" command-line overrides.
void apply_overrides(KvMap& kv, const std::vector<std::string>& sets);

// Sorted "key=value" lines; the canonical form hashed into CSV metadata.
std::string canonical_text(const KvMap& kv);
std::uint64_t config_hash(const KvMap& kv);

// Builds a scenario from the recognized keys; throws std::invalid_argument
// on unknown keys or unparsable values.
sim::ScenarioConfig scenario_from_kv(const KvMap& kv);

// Recognized scenario keys, for diagnostics.
const std::vector<std::string>& scenario_keys();

}  // namespace dhtsim::cli
