#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "oustab/experiment.hpp"

namespace oustab {

// Experiment configuration, parsed from a JSON tree.  Unknown keys anywhere
// in the document are a hard error.
ExperimentConfig experiment_config_from_json(const nlohmann::json& j);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

struct ReplayConfig {
  std::string input_manifest;
  std::vector<StabilizerSpec> stabilizers;
};

ReplayConfig replay_config_from_json(const nlohmann::json& j);
ReplayConfig load_replay_config(const std::filesystem::path& path);

// Oracle-table sweep: a model, a list of horizons, and the optional query
// constants the closed forms accept.
struct TheoryConfig {
  ModelSpec model;
  std::vector<double> horizons;
  std::optional<double> tau;
  std::optional<double> contraction_l;
  std::optional<double> c_small_t;
  std::optional<ATildeSpec> a_tilde;
};

TheoryConfig theory_config_from_json(const nlohmann::json& j);
TheoryConfig load_theory_config(const std::filesystem::path& path);

// Canonical serialization (sorted keys) and its FNV-1a hash, recorded in
// report metadata so a report can be traced back to its configuration.
std::string canonical_config_dump(const nlohmann::json& j);
std::string config_hash_hex(const nlohmann::json& j);

nlohmann::json load_json_file(const std::filesystem::path& path);

}  // namespace oustab
