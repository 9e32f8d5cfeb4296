#pragma once

#include <cstddef>

#include "gacg/env/pursuit.hpp"
#include "gacg/numerics/parameter_set.hpp"
#include "gacg/numerics/rng.hpp"
#include "gacg/policy/model.hpp"
#include "gacg/training/episode.hpp"

namespace gacg::train {

// Independent random streams used while acting. Keeping them separate means
// the environment sequence does not shift when, say, the graph mode changes
// how much edge noise is drawn.
struct RolloutStreams {
  num::RngStream env;
  num::RngStream actions;
  num::RngStream noise;
  num::RngStream groups;

  // Four streams derived from one seed and a base stream id.
  static RolloutStreams derive(std::uint64_t seed, std::uint64_t base);
};

struct EpisodeStats {
  double episode_return = 0.0;
  std::size_t length = 0;
  int captures = 0;
  int prey_total = 0;
};

struct Rollout {
  EpisodeRecord record;
  EpisodeStats stats;
};

// Plays one episode. With `params == nullptr` every agent acts uniformly at
// random and no groups or edge noise are recorded.
Rollout rollout_episode(const env::PursuitEnv& env, const policy::ModelSpec& spec,
                        const num::ParameterSet* params, double epsilon,
                        RolloutStreams& streams);

struct EvalResult {
  std::size_t episodes = 0;
  double mean_return = 0.0;
  double std_return = 0.0;
  double capture_rate = 0.0;  // captured prey / prey placed, over all episodes
  double mean_length = 0.0;
};

// Greedy (epsilon = 0) evaluation, or the random baseline when params is null.
EvalResult evaluate_policy(const env::PursuitEnv& env, const policy::ModelSpec& spec,
                           const num::ParameterSet* params, std::size_t episodes,
                           RolloutStreams& streams);

// Model dimensions implied by an environment and the learning knobs.
policy::ModelSpec make_model_spec(const env::EnvConfig& env, std::size_t window_length,
                                  std::size_t groups, const graph::GraphConfig& graph);

}  // namespace gacg::train
