#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "gacg/graph/graph_inference.hpp"
#include "gacg/numerics/parameter_set.hpp"
#include "gacg/policy/policy.hpp"

namespace gacg::policy {

// Everything needed to size and run the full network.
struct ModelSpec {
  std::size_t n_agents = 0;
  std::size_t obs_size = 0;
  std::size_t state_size = 0;
  std::size_t n_actions = 0;
  std::size_t window_length = 10;  // k
  std::size_t groups = 2;          // m; 0 disables grouping
  graph::EncoderConfig encoder;
  graph::GraphConfig graph;
  PolicyConfig policy;

  std::size_t window_width() const { return window_length * obs_size; }
  bool grouping_enabled() const { return groups > 0; }
  // Graph mode actually used: without groups the graph is the attention means.
  graph::GraphConfig effective_graph() const;
};

num::ParameterSet init_model_params(const ModelSpec& spec, num::RngStream& rng);

// B timesteps of n agents, rows ordered (timestep, agent).
struct TimestepBatch {
  num::Tensor observations;  // [B*n, d_obs]
  num::Tensor windows;       // [B*n, k*d_obs]
  std::vector<const graph::GroupPartition*> partitions;  // B entries; null if grouping off
  std::vector<std::vector<double>> noise;                // B entries
};

struct AgentForward {
  num::Tensor mu;                   // [B, n, n]
  graph::CoordinationGraph graph;
  MessageBatch messages;
  AgentQOutput heads;
};

// Observation encoder -> agent-pair means -> edges (stored noise) ->
// normalised graph -> GNN messages -> per-agent Q heads.
AgentForward forward_agents(const ModelSpec& spec, const num::ParameterSet& params,
                            const TimestepBatch& batch);

}  // namespace gacg::policy
