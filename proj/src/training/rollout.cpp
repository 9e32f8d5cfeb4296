#include "gacg/training/rollout.hpp"

#include <algorithm>
#include <cmath>

#include "gacg/numerics/errors.hpp"

namespace gacg::train {

RolloutStreams RolloutStreams::derive(std::uint64_t seed, std::uint64_t base) {
  return {num::RngStream(seed, base), num::RngStream(seed, base + 1),
          num::RngStream(seed, base + 2), num::RngStream(seed, base + 3)};
}

policy::ModelSpec make_model_spec(const env::EnvConfig& env, std::size_t window_length,
                                  std::size_t groups, const graph::GraphConfig& graph) {
  policy::ModelSpec spec;
  spec.n_agents = static_cast<std::size_t>(env.n_agents);
  spec.obs_size = env.observation_size();
  spec.state_size = env.state_size();
  spec.n_actions = env::kNumActions;
  spec.window_length = window_length;
  spec.groups = groups;
  spec.graph = graph;
  return spec;
}

Rollout rollout_episode(const env::PursuitEnv& env, const policy::ModelSpec& spec,
                        const num::ParameterSet* params, double epsilon,
                        RolloutStreams& streams) {
  const std::size_t n = spec.n_agents, d = spec.obs_size;
  if (static_cast<std::size_t>(env.config().n_agents) != n ||
      env.config().observation_size() != d) {
    throw DimensionError("rollout: model does not match the environment");
  }
  Rollout out;
  out.record.n_agents = n;
  out.record.obs_size = d;
  out.record.window_length = spec.window_length;
  out.stats.prey_total = env.config().n_prey;

  auto [state, obs] = env.reset(streams.env);
  const auto graph_config = spec.effective_graph();
  for (;;) {
    StepRecord step;
    step.observations.reserve(n * d);
    for (const auto& o : obs) step.observations.insert(step.observations.end(), o.begin(), o.end());
    step.state = env.global_state(state);
    out.record.steps.push_back(std::move(step));
    auto& cur = out.record.steps.back();
    const std::size_t t = out.record.steps.size() - 1;

    if (params == nullptr) {
      cur.actions.resize(n);
      for (auto& a : cur.actions) a = static_cast<int>(streams.actions.uniform_int(spec.n_actions));
    } else {
      auto windows = out.record.window(t);
      graph::GroupPartition partition;
      if (spec.grouping_enabled()) {
        partition = graph::divide_groups(windows, n, spec.groups, spec.window_length,
                                         streams.groups);
        cur.labels = partition.labels;
        cur.groups = partition.m;
      }
      cur.noise = graph::draw_edge_noise(graph_config, n, cur.groups, streams.noise);

      num::NoGradGuard no_grad;
      policy::TimestepBatch batch;
      batch.observations = num::Tensor({n, d}, cur.observations);
      batch.windows = num::Tensor({n, spec.window_width()}, std::move(windows));
      batch.partitions = {spec.grouping_enabled() ? &partition : nullptr};
      batch.noise = {cur.noise};
      const auto forward = policy::forward_agents(spec, *params, batch);
      cur.actions = policy::select_actions(forward.heads.q, epsilon, streams.actions);
    }

    auto result = env.step(state, cur.actions, streams.env);
    cur.reward = result.reward;
    cur.done = result.done;
    out.stats.episode_return += result.reward;
    out.stats.captures += result.captures;
    state = std::move(result.state);
    obs = std::move(result.observations);
    if (cur.done) break;
  }
  out.stats.length = out.record.length();
  return out;
}

EvalResult evaluate_policy(const env::PursuitEnv& env, const policy::ModelSpec& spec,
                           const num::ParameterSet* params, std::size_t episodes,
                           RolloutStreams& streams) {
  if (episodes == 0) throw ParameterError("evaluation needs at least one episode");
  EvalResult r;
  r.episodes = episodes;
  double sum = 0.0, sum_sq = 0.0, length = 0.0;
  long captured = 0, placed = 0;
  for (std::size_t e = 0; e < episodes; ++e) {
    const auto ep = rollout_episode(env, spec, params, 0.0, streams);
    sum += ep.stats.episode_return;
    sum_sq += ep.stats.episode_return * ep.stats.episode_return;
    length += static_cast<double>(ep.stats.length);
    captured += ep.stats.captures;
    placed += ep.stats.prey_total;
  }
  const double k = static_cast<double>(episodes);
  r.mean_return = sum / k;
  r.std_return = std::sqrt(std::max(0.0, sum_sq / k - r.mean_return * r.mean_return));
  r.capture_rate = placed > 0 ? static_cast<double>(captured) / static_cast<double>(placed) : 0.0;
  r.mean_length = length / k;
  return r;
}

}  // namespace gacg::train
