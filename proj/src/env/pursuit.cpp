#include "gacg/env/pursuit.hpp"

#include <algorithm>
#include <cstdlib>

#include "gacg/numerics/errors.hpp"

namespace gacg::env {
namespace {

constexpr std::array<Cell, kNumActions> kMoves{{{0, 0}, {0, -1}, {0, 1}, {1, 0}, {-1, 0}}};

double type_code(AgentType type) { return type == AgentType::kScout ? 1.0 : 0.5; }

}  // namespace

void EnvConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ParameterError("env: " + msg); };
  if (grid_size < 5) fail("grid_size must be >= 5");
  if (n_agents < 2) fail("n_agents must be >= 2");
  if (n_scouts < 0 || n_scouts > n_agents) fail("n_scouts must be in [0, n_agents]");
  if (n_prey < 1) fail("n_prey must be >= 1");
  for (int r : {scout_radius, captor_radius}) {
    if (r < 1 || 2 * r > grid_size) fail("vision radius must be in [1, grid_size/2]");
  }
  if (episode_limit < 1) fail("episode_limit must be >= 1");
}

int EnvConfig::max_radius() const {
  int r = 0;
  if (n_scouts > 0) r = std::max(r, scout_radius);
  if (n_scouts < n_agents) r = std::max(r, captor_radius);
  return r;
}

std::size_t EnvConfig::observation_size() const {
  const auto side = static_cast<std::size_t>(2 * max_radius() + 1);
  return 3 * side * side + 4;
}

std::size_t EnvConfig::state_size() const {
  return static_cast<std::size_t>(3 * n_agents + 3 * n_prey + 1);
}

int EnvState::prey_remaining() const {
  return static_cast<int>(std::count(prey_alive.begin(), prey_alive.end(), true));
}

PursuitEnv::PursuitEnv(EnvConfig config) : config_(config) { config_.validate(); }

int PursuitEnv::radius(AgentType type) const {
  return type == AgentType::kScout ? config_.scout_radius : config_.captor_radius;
}

int PursuitEnv::torus_delta(int a, int b) const {
  const int w = config_.grid_size;
  int d = ((b - a) % w + w) % w;  // [0, w)
  if (2 * d > w) d -= w;          // (-w/2, w/2]
  return d;
}

int PursuitEnv::chebyshev(const Cell& a, const Cell& b) const {
  return std::max(std::abs(torus_delta(a.x, b.x)), std::abs(torus_delta(a.y, b.y)));
}

Cell PursuitEnv::moved(const Cell& c, int action) const {
  const int w = config_.grid_size;
  const Cell m = kMoves.at(static_cast<std::size_t>(action));
  return {((c.x + m.x) % w + w) % w, ((c.y + m.y) % w + w) % w};
}

std::pair<EnvState, std::vector<Observation>> PursuitEnv::reset(num::RngStream& rng) const {
  const int w = config_.grid_size;
  const int cells = w * w;
  if (config_.n_prey > cells) {
    throw ParameterError("env: cannot place " + std::to_string(config_.n_prey) +
                         " prey on " + std::to_string(cells) + " cells");
  }
  EnvState s;
  for (int i = 0; i < config_.n_agents; ++i) {
    const auto c = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(cells)));
    s.agents.push_back({c % w, c / w});
    s.types.push_back(i < config_.n_scouts ? AgentType::kScout : AgentType::kCaptor);
  }
  // Partial Fisher-Yates over cell indices gives distinct prey cells.
  std::vector<int> pool(static_cast<std::size_t>(cells));
  for (int c = 0; c < cells; ++c) pool[static_cast<std::size_t>(c)] = c;
  for (int j = 0; j < config_.n_prey; ++j) {
    const auto pick = static_cast<std::size_t>(j) +
                      rng.uniform_int(static_cast<std::uint64_t>(cells - j));
    std::swap(pool[static_cast<std::size_t>(j)], pool[pick]);
    const int c = pool[static_cast<std::size_t>(j)];
    s.prey.push_back({c % w, c / w});
  }
  s.prey_alive.assign(static_cast<std::size_t>(config_.n_prey), true);
  s.t = 0;
  auto obs = observe_all(s);
  return {std::move(s), std::move(obs)};
}

bool PursuitEnv::is_done(const EnvState& state) const {
  return state.t >= config_.episode_limit || state.prey_remaining() == 0;
}

StepResult PursuitEnv::step(const EnvState& state, const std::vector<int>& actions,
                            num::RngStream& /*rng*/) const {
  if (is_done(state)) throw ContractViolation("env: step called on a finished episode");
  if (actions.size() != state.agents.size()) {
    throw ContractViolation("env: expected " + std::to_string(state.agents.size()) +
                            " actions, got " + std::to_string(actions.size()));
  }
  StepResult out;
  EnvState& s = out.state;
  s = state;
  for (std::size_t i = 0; i < s.agents.size(); ++i) {
    if (actions[i] < 0 || actions[i] >= kNumActions) {
      throw ContractViolation("env: invalid action " + std::to_string(actions[i]));
    }
    s.agents[i] = moved(s.agents[i], actions[i]);
  }

  for (std::size_t j = 0; j < s.prey.size(); ++j) {
    if (!s.prey_alive[j]) continue;
    Cell best = s.prey[j];
    int best_value = -1;
    for (int a = 0; a < kNumActions; ++a) {
      const Cell c = moved(s.prey[j], a);
      bool blocked = false;
      for (std::size_t o = 0; o < s.prey.size(); ++o) {
        if (o != j && s.prey_alive[o] && s.prey[o] == c) blocked = true;
      }
      if (blocked) continue;
      int nearest = config_.grid_size;
      for (const auto& ag : s.agents) nearest = std::min(nearest, chebyshev(c, ag));
      if (nearest > best_value) {
        best_value = nearest;
        best = c;
      }
    }
    s.prey[j] = best;
  }

  out.reward = config_.step_penalty;
  for (std::size_t j = 0; j < s.prey.size(); ++j) {
    if (!s.prey_alive[j]) continue;
    int close = 0;
    for (const auto& ag : s.agents) close += chebyshev(s.prey[j], ag) <= 1 ? 1 : 0;
    if (close >= 2) {
      s.prey_alive[j] = false;
      out.reward += config_.capture_reward;
      ++out.captures;
    }
  }
  s.t = state.t + 1;
  out.done = is_done(s);
  out.observations = observe_all(s);
  return out;
}

Observation PursuitEnv::observe(const EnvState& state, std::size_t agent) const {
  if (agent >= state.agents.size()) {
    throw ContractViolation("env: agent index " + std::to_string(agent) + " out of range");
  }
  const int big_r = config_.max_radius();
  const int side = 2 * big_r + 1;
  const std::size_t plane = static_cast<std::size_t>(side * side);
  Observation obs(config_.observation_size(), 0.0);

  const Cell self = state.agents[agent];
  const AgentType type = state.types[agent];
  const int r = radius(type);
  auto slot = [&](const Cell& other) -> long {
    const int dx = torus_delta(self.x, other.x);
    const int dy = torus_delta(self.y, other.y);
    if (std::abs(dx) > r || std::abs(dy) > r) return -1;
    return static_cast<long>((dy + big_r) * side + (dx + big_r));
  };

  for (std::size_t i = 0; i < state.agents.size(); ++i) {
    if (i == agent) continue;
    const long k = slot(state.agents[i]);
    if (k < 0) continue;
    obs[static_cast<std::size_t>(k)] = 1.0;
    obs[2 * plane + static_cast<std::size_t>(k)] = type_code(type);
  }
  for (std::size_t j = 0; j < state.prey.size(); ++j) {
    if (!state.prey_alive[j]) continue;
    const long k = slot(state.prey[j]);
    if (k < 0) continue;
    obs[plane + static_cast<std::size_t>(k)] = 1.0;
    obs[2 * plane + static_cast<std::size_t>(k)] = type_code(type);
  }
  const std::size_t tail = 3 * plane;
  obs[tail + static_cast<std::size_t>(type)] = 1.0;
  obs[tail + 2] = static_cast<double>(self.x) / config_.grid_size;
  obs[tail + 3] = static_cast<double>(self.y) / config_.grid_size;
  return obs;
}

std::vector<Observation> PursuitEnv::observe_all(const EnvState& state) const {
  std::vector<Observation> out;
  out.reserve(state.agents.size());
  for (std::size_t i = 0; i < state.agents.size(); ++i) out.push_back(observe(state, i));
  return out;
}

std::vector<double> PursuitEnv::global_state(const EnvState& state) const {
  const double w = config_.grid_size;
  std::vector<double> out;
  out.reserve(config_.state_size());
  for (const auto& a : state.agents) {
    out.push_back(a.x / w);
    out.push_back(a.y / w);
  }
  for (auto t : state.types) out.push_back(t == AgentType::kScout ? 1.0 : 0.0);
  for (std::size_t j = 0; j < state.prey.size(); ++j) {
    const bool alive = state.prey_alive[j];
    out.push_back(alive ? state.prey[j].x / w : 0.0);
    out.push_back(alive ? state.prey[j].y / w : 0.0);
  }
  for (bool alive : state.prey_alive) out.push_back(alive ? 1.0 : 0.0);
  out.push_back(static_cast<double>(state.t) / config_.episode_limit);
  return out;
}

std::string PursuitEnv::render_ascii(const EnvState& state) const {
  const int w = config_.grid_size;
  std::vector<std::string> rows(static_cast<std::size_t>(w),
                                std::string(static_cast<std::size_t>(w), '.'));
  for (std::size_t j = 0; j < state.prey.size(); ++j) {
    if (state.prey_alive[j]) {
      rows[static_cast<std::size_t>(state.prey[j].y)][static_cast<std::size_t>(state.prey[j].x)] = 'P';
    }
  }
  for (std::size_t i = 0; i < state.agents.size(); ++i) {
    const auto& a = state.agents[i];
    rows[static_cast<std::size_t>(a.y)][static_cast<std::size_t>(a.x)] =
        state.types[i] == AgentType::kScout ? 'S' : 'C';
  }
  std::string out;
  for (const auto& r : rows) out += r + "\n";
  return out;
}

}  // namespace gacg::env
