#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "gacg/env/pursuit.hpp"
#include "gacg/graph/graph_inference.hpp"
#include "gacg/policy/model.hpp"
#include "gacg/training/trainer.hpp"

namespace gacg::harness {

// Bad key, bad type or an invalid combination of values. The CLI maps it to
// exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ModelSection {
  std::size_t hidden = 64;  // observation encoder hidden width
  std::size_t d_h = 32;
  std::size_t d_k = 32;
  std::size_t gnn_layers = 2;
  std::size_t agent_hidden = 64;
  std::size_t mixer_embed = 32;
};

struct GroupSection {
  std::size_t m = 2;   // number of groups, 0 disables grouping
  std::size_t k = 10;  // observation window length
};

struct RunConfig {
  env::EnvConfig env;
  ModelSection model;
  graph::GraphConfig graph;
  GroupSection group;
  train::TrainConfig train;
  std::uint64_t seed = 0;
  std::string run_id = "gacg";
  std::string output_dir = "runs";

  // Run directory: <output_dir>/<run_id>/seed<seed>.
  std::string run_dir() const;
  policy::ModelSpec model_spec() const;
};

// Every key with its resolved value.
nlohmann::json to_json(const RunConfig& config);

// Strict parse: any key absent from the defaults is rejected by its dotted
// path, as is a value of the wrong type. The result is validated.
RunConfig from_json(const nlohmann::json& doc);
RunConfig load_config(const std::string& path);

// Applies "section.key=value". The value is read as JSON when it parses and
// as a bare string otherwise.
void apply_override(nlohmann::json& doc, const std::string& assignment);

// Resolves interactions between settings (m = 0 forces lambda = 0) and
// throws ConfigError on anything out of range.
void finalize(RunConfig& config);

// FNV-1a over the canonical dump of to_json.
std::uint64_t config_hash(const RunConfig& config);
std::string hash_hex(std::uint64_t hash);

}  // namespace gacg::harness
