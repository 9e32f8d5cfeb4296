#pragma once

// Small models and replayable data shared by the unit and acceptance suites.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "gacg/env/pursuit.hpp"
#include "gacg/numerics/parameter_set.hpp"
#include "gacg/numerics/rng.hpp"
#include "gacg/numerics/grad_check.hpp"
#include "gacg/numerics/ops.hpp"
#include "gacg/numerics/tensor.hpp"
#include "gacg/policy/policy.hpp"
#include "gacg/policy/model.hpp"
#include "gacg/training/rollout.hpp"
#include "gacg/training/trainer.hpp"

namespace gacg::testing {

inline env::EnvConfig tiny_env() {
  env::EnvConfig c;
  c.grid_size = 5;
  c.n_agents = 4;
  c.n_scouts = 2;
  c.n_prey = 1;
  c.scout_radius = 1;
  c.captor_radius = 1;
  c.episode_limit = 6;
  return c;
}

inline policy::ModelSpec tiny_spec(const env::EnvConfig& env, std::size_t groups = 2,
                                   std::size_t window = 2,
                                   graph::EdgeMode mode = graph::EdgeMode::kGacg) {
  graph::GraphConfig g;
  g.mode = mode;
  auto spec = train::make_model_spec(env, window, groups, g);
  spec.encoder = {8, 6, 4};
  spec.policy = {2, 8, 6};
  return spec;
}

inline num::Tensor random_tensor(num::Shape shape, num::RngStream& rng, double lo = -1.0,
                                 double hi = 1.0) {
  std::vector<double> v(num::shape_numel(shape));
  for (auto& x : v) x = lo + (hi - lo) * rng.uniform();
  return num::Tensor(std::move(shape), std::move(v));
}

// Model parameters redrawn uniformly in [-gain * b, gain * b], where b is the
// largest magnitude of the default initialisation of that tensor.
inline num::ParameterSet random_point(const policy::ModelSpec& spec, num::RngStream& rng,
                                      double gain) {
  auto params = policy::init_model_params(spec, rng);
  for (auto& [name, t] : params) {
    double bound = 0.0;
    for (double v : t.values()) bound = std::max(bound, std::abs(v));
    for (auto& v : t.mutable_values()) v = gain * bound * (2.0 * rng.uniform() - 1.0);
  }
  return params;
}

inline void scale_block(num::ParameterSet& params, const std::string& prefix, double factor) {
  for (auto& [name, t] : params) {
    if (name.rfind(prefix, 0) != 0) continue;
    for (auto& v : t.mutable_values()) v *= factor;
  }
}

// Episodes played by `params` under exploration rate epsilon; groups and
// edge noise are recorded exactly as during training.
inline std::vector<train::EpisodeRecord> play_episodes(const env::EnvConfig& env_config,
                                                       const policy::ModelSpec& spec,
                                                       const num::ParameterSet& params,
                                                       std::size_t count, std::uint64_t seed,
                                                       double epsilon = 1.0) {
  env::PursuitEnv env(env_config);
  auto streams = train::RolloutStreams::derive(seed, 0);
  std::vector<train::EpisodeRecord> out;
  for (std::size_t i = 0; i < count; ++i) {
    out.push_back(train::rollout_episode(env, spec, &params, epsilon, streams).record);
  }
  return out;
}

inline std::vector<const train::EpisodeRecord*> pointers(
    const std::vector<train::EpisodeRecord>& episodes) {
  std::vector<const train::EpisodeRecord*> out;
  for (const auto& e : episodes) out.push_back(&e);
  return out;
}

// Hand-sized model for exhaustive finite-difference checks.
inline policy::ModelSpec micro_spec() {
  policy::ModelSpec spec;
  spec.n_agents = 3;
  spec.obs_size = 3;
  spec.state_size = 4;
  spec.n_actions = 5;
  spec.window_length = 2;
  spec.groups = 2;
  spec.encoder = {4, 3, 2};
  spec.policy = {2, 4, 3};
  return spec;
}

// Episodes with dense uniform observations and states, a fixed 2/1 style
// partition and one stored edge-noise draw per step. Every episode ends
// terminal.
inline std::vector<train::EpisodeRecord> synthetic_episodes(const policy::ModelSpec& spec,
                                                            num::RngStream& rng,
                                                            std::size_t count,
                                                            std::size_t length) {
  std::vector<train::EpisodeRecord> out;
  for (std::size_t e = 0; e < count; ++e) {
    train::EpisodeRecord ep;
    ep.n_agents = spec.n_agents;
    ep.obs_size = spec.obs_size;
    ep.window_length = spec.window_length;
    for (std::size_t t = 0; t < length; ++t) {
      train::StepRecord s;
      s.observations.resize(spec.n_agents * spec.obs_size);
      for (auto& x : s.observations) x = rng.uniform();
      s.state.resize(spec.state_size);
      for (auto& x : s.state) x = rng.uniform();
      for (std::size_t i = 0; i < spec.n_agents; ++i) s.labels.push_back(i * 2 < spec.n_agents ? 0 : 1);
      s.groups = 2;
      s.noise = {rng.normal()};
      for (std::size_t i = 0; i < spec.n_agents; ++i) {
        s.actions.push_back(static_cast<int>(rng.uniform_int(spec.n_actions)));
      }
      s.reward = 2.0 * rng.uniform() - 1.0;
      s.done = t + 1 == length;
      ep.steps.push_back(std::move(s));
    }
    out.push_back(std::move(ep));
  }
  return out;
}

// Smallest distance from any non-differentiable point of the loss (ReLU,
// |.|, clamp, ELU and the pairwise policy distance at 0) at the current
// parameters. Finite differences are only meaningful when this is well
// above the probe step.
inline double kink_margin(const policy::ModelSpec& spec, const num::ParameterSet& p,
                          const train::TransitionBatch& batch) {
  num::NoGradGuard no_grad;
  double margin = 1e300;
  auto scan = [&](const num::Tensor& t) {
    for (double v : t.values()) margin = std::min(margin, std::abs(v));
  };
  const auto& steps = batch.steps();
  const std::size_t n = spec.n_agents;
  const std::size_t rows = steps.observations.dim(0), b = rows / n;

  auto pre1 = num::add_bias(num::matmul(steps.observations, p.at("encoder.fc1.w")),
                            p.at("encoder.fc1.b"));
  scan(pre1);
  auto pre2 = num::add_bias(num::matmul(num::relu(pre1), p.at("encoder.fc2.w")),
                            p.at("encoder.fc2.b"));
  scan(pre2);
  auto encoded = num::relu(pre2);

  auto mu = graph::agent_pair_means(encoded, n, p);
  auto edges = graph::edges_from_noise(spec.effective_graph(), mu, steps.partitions, steps.noise);
  for (std::size_t k = 0; k < b; ++k) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (i == j) continue;
        const double e = edges.at((k * n + i) * n + j);
        margin = std::min({margin, std::abs(e), std::abs(e - 1.0)});
      }
    }
  }
  auto graph = graph::build_adjacency(edges, n);
  num::Tensor h = encoded;
  for (std::size_t l = 0; p.contains("gnn.w" + std::to_string(l)); ++l) {
    const std::size_t d = h.dim(1);
    auto pre = num::matmul(
        num::reshape(num::bmm(graph.normalized, num::reshape(h, {b, n, d})), {b * n, d}),
        p.at("gnn.w" + std::to_string(l)));
    scan(pre);
    h = num::relu(pre);
  }
  auto hidden_pre = num::add_bias(
      num::add(num::matmul(steps.windows, p.at("agent.fc1_obs.w")),
               num::matmul(h, p.at("agent.fc1_msg.w"))),
      p.at("agent.fc1.b"));
  scan(hidden_pre);
  auto heads = policy::agent_q_values(steps.windows, h, p);
  for (std::size_t k = 0; k < b; ++k) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        double ss = 0.0;
        for (std::size_t a = 0; a < spec.n_actions; ++a) {
          const double d = heads.pi.at(k * n + i, a) - heads.pi.at(k * n + j, a);
          ss += d * d;
        }
        margin = std::min(margin, std::sqrt(ss));
      }
    }
  }

  auto hyper = [&](const std::string& name) {
    return num::add_bias(num::matmul(batch.states(), p.at(name + ".w")), p.at(name + ".b"));
  };
  scan(hyper("mixer.hyper_w1"));
  scan(hyper("mixer.hyper_w2"));
  scan(hyper("mixer.v1"));
  auto chosen = num::reshape(num::gather_cols(heads.q, batch.actions()), {b, n});
  const auto mixed = policy::mix(chosen, batch.states(), p);
  const std::size_t embed = p.at("mixer.hyper_b1.b").dim(0);
  auto pre_elu = num::add(
      num::reshape(num::bmm(num::reshape(chosen, {b, 1, n}), mixed.w1), {b, embed}),
      hyper("mixer.hyper_b1"));
  scan(pre_elu);
  return margin;
}

struct ChainCheckResult {
  num::GradCheckReport worst;
  std::size_t points = 0;
  std::size_t rejected = 0;
};

// Finite-difference check of the total training loss through the whole
// model: encoder, pair means, edges from stored noise, normalised graph,
// GNN, heads, mixer, TD and group terms.
//
// Points are drawn at twice the default initialisation scale on a dense
// synthetic batch, and redrawn while any kink lies within `kink_gap` of the
// current point. Rewards are set so every TD residual is about 0.1; this
// keeps the loss near the size of its gradients instead of dominated by
// large constant Q offsets, which is what limits finite-difference accuracy.
inline ChainCheckResult full_chain_grad_check(std::uint64_t seed, std::size_t points,
                                              double eps = 1e-5, double kink_gap = 1e-2) {
  const auto spec = micro_spec();
  num::RngStream rng(seed, 0);
  train::TrainConfig config;
  auto episodes = synthetic_episodes(spec, rng, 2, 3);
  for (auto& ep : episodes) {
    for (auto& st : ep.steps) {
      for (auto& x : st.observations) x = 4.0 * x - 2.0;
    }
  }
  const auto base_ptrs = pointers(episodes);
  const train::TransitionBatch base(base_ptrs, spec);

  ChainCheckResult result;
  for (std::size_t p = 0; p < points; ++p) {
    auto online = random_point(spec, rng, 2.0);
    while (kink_margin(spec, online, base) < kink_gap) {
      ++result.rejected;
      online = random_point(spec, rng, 2.0);
    }
    const auto target = random_point(spec, rng, 2.0);

    auto tuned = episodes;
    {
      const auto bootstrap = train::td_targets(base, target, spec, config.gamma);
      const auto forward = policy::forward_agents(spec, online, base.steps());
      auto chosen = num::reshape(num::gather_cols(forward.heads.q, base.actions()),
                                 {base.size(), spec.n_agents});
      const auto q_tot = policy::mix(chosen, base.states(), online).q_tot;
      std::size_t i = 0;
      for (auto& ep : tuned) {
        for (auto& st : ep.steps) {
          st.reward = q_tot.at(i) - (bootstrap[i] - st.reward) + 0.1 * rng.normal();
          ++i;
        }
      }
    }
    const auto ptrs = pointers(tuned);
    const train::TransitionBatch batch(ptrs, spec);
    auto f = [&](const num::ParameterSet& ps) {
      return train::compute_losses(batch, ps, target, spec, config).total;
    };
    const auto report = num::grad_check(f, online, eps);
    if (report.max_relative_error >= result.worst.max_relative_error) result.worst = report;
    ++result.points;
  }
  return result;
}

}  // namespace gacg::testing
