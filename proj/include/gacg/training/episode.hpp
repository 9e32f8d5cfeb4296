#pragma once

#include <cstddef>
#include <deque>
#include <vector>

#include "gacg/graph/graph_inference.hpp"
#include "gacg/numerics/rng.hpp"

namespace gacg::train {

// One acting-time timestep. The stored partition and raw edge noise let
// training rebuild exactly the graph the agents acted on.
struct StepRecord {
  std::vector<double> observations;  // n * d_obs, agent-major
  std::vector<double> state;         // global state features
  std::vector<std::size_t> labels;   // group label per agent; empty when grouping is off
  std::size_t groups = 0;
  std::vector<double> noise;
  std::vector<int> actions;
  double reward = 0.0;
  bool done = false;

  bool operator==(const StepRecord&) const = default;
};

struct EpisodeRecord {
  std::size_t n_agents = 0;
  std::size_t obs_size = 0;
  std::size_t window_length = 1;
  std::vector<StepRecord> steps;

  std::size_t length() const { return steps.size(); }
  double total_return() const;

  // Observation windows at timestep t: n rows of k stacked observations,
  // oldest first, zero-padded before the episode start.
  std::vector<double> window(std::size_t t) const;
  graph::GroupPartition partition(std::size_t t) const;

  // Field lengths agree and only the final step is terminal.
  void validate() const;

  bool operator==(const EpisodeRecord&) const = default;
};

// FIFO ring of whole episodes.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(EpisodeRecord episode);
  // Uniform sample of distinct episodes.
  std::vector<const EpisodeRecord*> sample(std::size_t batch_size, num::RngStream& rng) const;

  std::size_t size() const { return episodes_.size(); }
  std::size_t capacity() const { return capacity_; }
  const EpisodeRecord& at(std::size_t i) const { return episodes_.at(i); }
  void clear() { episodes_.clear(); }

 private:
  std::size_t capacity_;
  std::deque<EpisodeRecord> episodes_;
};

}  // namespace gacg::train
