#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "gacg/numerics/rng.hpp"

namespace gacg::env {

// Partially observable cooperative pursuit on a W x W torus. Agents come in
// two types with different vision radii; prey flee greedily and are captured
// when at least two agents stand within Chebyshev distance 1.
struct EnvConfig {
  int grid_size = 10;
  int n_agents = 6;
  int n_scouts = 3;  // agents [0, n_scouts) are scouts, the rest captors
  int n_prey = 2;
  int scout_radius = 3;
  int captor_radius = 1;
  int episode_limit = 60;
  double step_penalty = -0.01;
  double capture_reward = 10.0;

  // Throws ParameterError on an invalid combination.
  void validate() const;
  int max_radius() const;
  std::size_t observation_size() const;
  std::size_t state_size() const;
};

enum class AgentType { kScout = 0, kCaptor = 1 };

enum Action : int { kStay = 0, kNorth = 1, kSouth = 2, kEast = 3, kWest = 4 };
inline constexpr int kNumActions = 5;

struct Cell {
  int x = 0;
  int y = 0;
  bool operator==(const Cell&) const = default;
};

struct EnvState {
  std::vector<Cell> agents;
  std::vector<AgentType> types;
  std::vector<Cell> prey;
  std::vector<bool> prey_alive;
  int t = 0;

  bool operator==(const EnvState&) const = default;
  int prey_remaining() const;
};

using Observation = std::vector<double>;

struct StepResult {
  EnvState state;
  std::vector<Observation> observations;
  double reward = 0.0;
  bool done = false;
  int captures = 0;
};

class PursuitEnv {
 public:
  explicit PursuitEnv(EnvConfig config);

  const EnvConfig& config() const { return config_; }

  // Places agents uniformly (co-location allowed) and prey uniformly on
  // distinct cells.
  std::pair<EnvState, std::vector<Observation>> reset(num::RngStream& rng) const;

  // Agents move, then each living prey flees, then captures are resolved.
  // The rng is accepted for interface symmetry; the dynamics are deterministic.
  StepResult step(const EnvState& state, const std::vector<int>& actions,
                  num::RngStream& rng) const;

  bool is_done(const EnvState& state) const;

  // Egocentric patch (ally, prey, self-type channels) over a square of side
  // 2R+1 for R the largest vision radius, then the type one-hot and x/W, y/W.
  Observation observe(const EnvState& state, std::size_t agent) const;
  std::vector<Observation> observe_all(const EnvState& state) const;

  // Full-state feature vector for the mixer: agent positions, agent types,
  // prey positions, prey alive flags, t / T.
  std::vector<double> global_state(const EnvState& state) const;

  // W lines of W glyphs: agents 'S'/'C', living prey 'P', empty '.'.
  std::string render_ascii(const EnvState& state) const;

  int radius(AgentType type) const;
  int torus_delta(int a, int b) const;
  int chebyshev(const Cell& a, const Cell& b) const;
  Cell moved(const Cell& c, int action) const;

 private:
  EnvConfig config_;
};

}  // namespace gacg::env
