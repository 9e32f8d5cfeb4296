#include "gacg/policy/model.hpp"

#include "gacg/numerics/errors.hpp"

namespace gacg::policy {

graph::GraphConfig ModelSpec::effective_graph() const {
  graph::GraphConfig g = graph;
  if (!grouping_enabled()) g.mode = graph::EdgeMode::kAttention;
  return g;
}

num::ParameterSet init_model_params(const ModelSpec& spec, num::RngStream& rng) {
  num::ParameterSet params;
  graph::init_graph_params(params, spec.obs_size, spec.encoder, rng);
  init_policy_params(params, spec.window_width(), spec.encoder.d_h, spec.n_agents,
                     spec.state_size, spec.n_actions, spec.policy, rng);
  return params;
}

AgentForward forward_agents(const ModelSpec& spec, const num::ParameterSet& params,
                            const TimestepBatch& batch) {
  const std::size_t n = spec.n_agents;
  if (batch.observations.rank() != 2 || batch.observations.dim(0) % n != 0) {
    throw DimensionError("forward_agents: observations must be [B*n, d_obs]");
  }
  const std::size_t steps = batch.observations.dim(0) / n;
  if (batch.partitions.size() != steps || batch.noise.size() != steps) {
    throw DimensionError("forward_agents: per-timestep partition/noise count mismatch");
  }

  AgentForward out;
  auto encoded = graph::encode_observations(batch.observations, params);
  out.mu = graph::agent_pair_means(encoded, n, params);
  auto edges =
      graph::edges_from_noise(spec.effective_graph(), out.mu, batch.partitions, batch.noise);
  out.graph = graph::build_adjacency(edges, n);
  out.messages = gnn_forward(out.graph.normalized, encoded, params);
  out.heads = agent_q_values(batch.windows, out.messages.messages, params);
  return out;
}

}  // namespace gacg::policy
