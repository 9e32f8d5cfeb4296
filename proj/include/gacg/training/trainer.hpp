#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "gacg/numerics/parameter_set.hpp"
#include "gacg/numerics/rng.hpp"
#include "gacg/policy/model.hpp"
#include "gacg/training/episode.hpp"
#include "gacg/training/losses.hpp"
#include "gacg/training/optimizer.hpp"

namespace gacg::train {

// Which parameters the group regulariser trains: everything on its forward
// path, or only the per-agent heads (messages detached).
enum class GroupLossScope { kAll, kPolicyOnly };

std::string to_string(GroupLossScope scope);
GroupLossScope parse_group_loss_scope(const std::string& name);

struct TrainConfig {
  double lambda = 0.1;
  double gamma = 0.95;
  double lr = 5e-4;
  double grad_clip = 10.0;
  std::size_t batch_episodes = 8;
  std::size_t buffer_capacity = 500;
  std::size_t target_period = 200;
  std::size_t total_steps = 50000;
  std::size_t updates_per_episode = 1;
  double epsilon_start = 1.0;
  double epsilon_end = 0.05;
  std::size_t epsilon_anneal_steps = 20000;
  GroupLossScope group_loss_scope = GroupLossScope::kAll;
  std::size_t eval_interval = 500;
  std::size_t eval_episodes = 20;
  std::size_t checkpoint_interval = 0;  // 0: only the final checkpoint

  AdamConfig adam() const;
  // Linear anneal from epsilon_start to epsilon_end over epsilon_anneal_steps.
  double epsilon_at(std::size_t env_steps) const;
};

// All timesteps of a set of sampled episodes, flattened in episode order.
class TransitionBatch {
 public:
  TransitionBatch(std::span<const EpisodeRecord* const> episodes, const policy::ModelSpec& spec);
  TransitionBatch(const TransitionBatch&) = delete;
  TransitionBatch& operator=(const TransitionBatch&) = delete;

  std::size_t size() const { return rewards_.size(); }
  const policy::TimestepBatch& steps() const { return steps_; }
  const num::Tensor& states() const { return states_; }
  std::span<const std::size_t> actions() const { return actions_; }
  std::span<const double> rewards() const { return rewards_; }
  std::span<const char> terminal() const { return terminal_; }

 private:
  std::vector<graph::GroupPartition> partitions_;
  policy::TimestepBatch steps_;
  num::Tensor states_;
  std::vector<std::size_t> actions_;
  std::vector<double> rewards_;
  std::vector<char> terminal_;
};

struct LossTerms {
  num::Tensor td;
  num::Tensor group_reg;
  double group_raw = 0.0;
  num::Tensor total;
};

// r + gamma * Q_tot'(s', greedy actions of the target heads) with terminal
// transitions not bootstrapped. Uses only target parameters.
std::vector<double> td_targets(const TransitionBatch& batch, const num::ParameterSet& target,
                               const policy::ModelSpec& spec, double gamma);

// Mean squared TD error of the online Q_tot against td_targets.
num::Tensor td_loss(const TransitionBatch& batch, const num::ParameterSet& online,
                    const num::ParameterSet& target, const policy::ModelSpec& spec,
                    double gamma);

// TD loss plus the group regulariser from one shared online forward pass.
LossTerms compute_losses(const TransitionBatch& batch, const num::ParameterSet& online,
                         const num::ParameterSet& target, const policy::ModelSpec& spec,
                         const TrainConfig& config);

// Online/target networks with their optimiser state.
class Learner {
 public:
  Learner(policy::ModelSpec spec, TrainConfig config, num::RngStream& init_rng);

  // Sample -> rebuild stored graphs -> losses -> backward -> Adam; hard
  // target sync every target_period updates.
  LossReport train_step(const ReplayBuffer& buffer, num::RngStream& rng);

  const policy::ModelSpec& spec() const { return spec_; }
  const TrainConfig& config() const { return config_; }
  num::ParameterSet& online() { return online_; }
  const num::ParameterSet& online() const { return online_; }
  num::ParameterSet& target() { return target_; }
  const num::ParameterSet& target() const { return target_; }
  AdamState& optimizer() { return adam_; }
  const AdamState& optimizer() const { return adam_; }
  std::size_t updates() const { return updates_; }
  void set_updates(std::size_t updates) { updates_ = updates; }

 private:
  policy::ModelSpec spec_;
  TrainConfig config_;
  num::ParameterSet online_;
  num::ParameterSet target_;
  AdamState adam_;
  std::size_t updates_ = 0;
};

}  // namespace gacg::train
