#include "gacg/training/episode.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "gacg/numerics/errors.hpp"

namespace gacg::train {

double EpisodeRecord::total_return() const {
  double r = 0.0;
  for (const auto& s : steps) r += s.reward;
  return r;
}

std::vector<double> EpisodeRecord::window(std::size_t t) const {
  if (t >= steps.size()) throw ContractViolation("window: timestep out of range");
  const std::size_t k = window_length, d = obs_size;
  std::vector<double> out(n_agents * k * d, 0.0);
  for (std::size_t j = 0; j < k; ++j) {
    if (t + j + 1 < k) continue;  // before the episode start
    const auto& obs = steps[t + j + 1 - k].observations;
    for (std::size_t i = 0; i < n_agents; ++i) {
      std::copy_n(obs.begin() + static_cast<std::ptrdiff_t>(i * d), d,
                  out.begin() + static_cast<std::ptrdiff_t>(i * k * d + j * d));
    }
  }
  return out;
}

graph::GroupPartition EpisodeRecord::partition(std::size_t t) const {
  const auto& s = steps.at(t);
  return {s.labels, s.groups, window_length};
}

void EpisodeRecord::validate() const {
  if (steps.empty()) throw ContractViolation("episode: no steps");
  for (std::size_t t = 0; t < steps.size(); ++t) {
    const auto& s = steps[t];
    const std::string where = "episode step " + std::to_string(t) + ": ";
    if (s.observations.size() != n_agents * obs_size) {
      throw ContractViolation(where + "observation length mismatch");
    }
    if (s.actions.size() != n_agents) throw ContractViolation(where + "action count mismatch");
    if (!s.labels.empty() && s.labels.size() != n_agents) {
      throw ContractViolation(where + "label count mismatch");
    }
    if (s.done != (t + 1 == steps.size())) {
      throw ContractViolation(where + "terminal flag must mark exactly the last step");
    }
  }
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ParameterError("replay buffer capacity must be positive");
}

void ReplayBuffer::push(EpisodeRecord episode) {
  if (episodes_.size() == capacity_) episodes_.pop_front();
  episodes_.push_back(std::move(episode));
}

std::vector<const EpisodeRecord*> ReplayBuffer::sample(std::size_t batch_size,
                                                       num::RngStream& rng) const {
  if (batch_size == 0 || batch_size > episodes_.size()) {
    throw ContractViolation("replay: cannot sample " + std::to_string(batch_size) +
                            " episodes from " + std::to_string(episodes_.size()));
  }
  std::vector<std::size_t> idx(episodes_.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::vector<const EpisodeRecord*> out;
  out.reserve(batch_size);
  for (std::size_t i = 0; i < batch_size; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.uniform_int(idx.size() - i));
    std::swap(idx[i], idx[j]);
    out.push_back(&episodes_[idx[i]]);
  }
  return out;
}

}  // namespace gacg::train
