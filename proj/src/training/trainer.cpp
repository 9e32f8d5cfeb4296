#include "gacg/training/trainer.hpp"

#include <algorithm>
#include <cmath>

#include "gacg/numerics/errors.hpp"
#include "gacg/numerics/ops.hpp"

namespace gacg::train {

using num::Tensor;

std::string to_string(GroupLossScope scope) {
  return scope == GroupLossScope::kAll ? "all" : "policy_only";
}

GroupLossScope parse_group_loss_scope(const std::string& name) {
  if (name == "all") return GroupLossScope::kAll;
  if (name == "policy_only") return GroupLossScope::kPolicyOnly;
  throw ParameterError("unknown group loss scope '" + name + "'");
}

AdamConfig TrainConfig::adam() const {
  AdamConfig a;
  a.lr = lr;
  a.clip_norm = grad_clip;
  return a;
}

double TrainConfig::epsilon_at(std::size_t env_steps) const {
  if (epsilon_anneal_steps == 0 || env_steps >= epsilon_anneal_steps) return epsilon_end;
  const double frac = static_cast<double>(env_steps) / static_cast<double>(epsilon_anneal_steps);
  return epsilon_start + frac * (epsilon_end - epsilon_start);
}

TransitionBatch::TransitionBatch(std::span<const EpisodeRecord* const> episodes,
                                 const policy::ModelSpec& spec) {
  if (episodes.empty()) throw ContractViolation("transition batch: no episodes");
  const std::size_t n = spec.n_agents, d = spec.obs_size, width = spec.window_width();
  std::size_t total = 0;
  for (const auto* ep : episodes) {
    if (ep->n_agents != n || ep->obs_size != d || ep->window_length != spec.window_length) {
      throw DimensionError("transition batch: episode layout does not match the model");
    }
    total += ep->length();
  }

  std::vector<double> obs(total * n * d), windows(total * n * width);
  std::vector<double> states(total * spec.state_size);
  partitions_.reserve(total);
  actions_.reserve(total * n);
  std::size_t row = 0;
  for (const auto* ep : episodes) {
    for (std::size_t t = 0; t < ep->length(); ++t, ++row) {
      const auto& s = ep->steps[t];
      std::ranges::copy(s.observations, obs.begin() + static_cast<std::ptrdiff_t>(row * n * d));
      const auto w = ep->window(t);
      std::ranges::copy(w, windows.begin() + static_cast<std::ptrdiff_t>(row * n * width));
      if (s.state.size() != spec.state_size) {
        throw DimensionError("transition batch: state width mismatch");
      }
      std::ranges::copy(s.state,
                        states.begin() + static_cast<std::ptrdiff_t>(row * spec.state_size));
      if (s.labels.empty()) {
        steps_.partitions.push_back(nullptr);
      } else {
        partitions_.push_back(ep->partition(t));
        steps_.partitions.push_back(&partitions_.back());
      }
      steps_.noise.push_back(s.noise);
      for (int a : s.actions) actions_.push_back(static_cast<std::size_t>(a));
      rewards_.push_back(s.reward);
      terminal_.push_back(s.done ? 1 : 0);
    }
  }
  steps_.observations = Tensor({total * n, d}, std::move(obs));
  steps_.windows = Tensor({total * n, width}, std::move(windows));
  states_ = Tensor({total, spec.state_size}, std::move(states));
}

std::vector<double> td_targets(const TransitionBatch& batch, const num::ParameterSet& target,
                               const policy::ModelSpec& spec, double gamma) {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw ParameterError("td: gamma must be in [0, 1)");
  num::NoGradGuard no_grad;
  const auto forward = policy::forward_agents(spec, target, batch.steps());
  const auto& q = forward.heads.q;
  const std::size_t rows = q.dim(0), actions = q.dim(1);
  std::vector<std::size_t> greedy(rows, 0);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t a = 1; a < actions; ++a) {
      if (q.at(r, a) > q.at(r, greedy[r])) greedy[r] = a;
    }
  }
  const std::size_t steps = batch.size();
  auto chosen = num::reshape(num::gather_cols(q, greedy), {steps, spec.n_agents});
  const auto next_value = policy::mix(chosen, batch.states(), target).q_tot;

  std::vector<double> y(steps);
  for (std::size_t i = 0; i < steps; ++i) {
    y[i] = batch.rewards()[i];
    if (!batch.terminal()[i]) y[i] += gamma * next_value.at(i + 1);
  }
  return y;
}

namespace {

Tensor td_from_forward(const TransitionBatch& batch, const policy::AgentForward& forward,
                       const num::ParameterSet& online, const policy::ModelSpec& spec,
                       std::vector<double> targets) {
  const std::size_t steps = batch.size();
  auto chosen =
      num::reshape(num::gather_cols(forward.heads.q, batch.actions()), {steps, spec.n_agents});
  auto q_tot = policy::mix(chosen, batch.states(), online).q_tot;
  return num::mean(num::square(num::sub(q_tot, Tensor({steps}, std::move(targets)))));
}

}  // namespace

Tensor td_loss(const TransitionBatch& batch, const num::ParameterSet& online,
               const num::ParameterSet& target, const policy::ModelSpec& spec, double gamma) {
  auto targets = td_targets(batch, target, spec, gamma);
  const auto forward = policy::forward_agents(spec, online, batch.steps());
  return td_from_forward(batch, forward, online, spec, std::move(targets));
}

LossTerms compute_losses(const TransitionBatch& batch, const num::ParameterSet& online,
                         const num::ParameterSet& target, const policy::ModelSpec& spec,
                         const TrainConfig& config) {
  if (!(config.lambda >= 0.0)) throw ParameterError("train: lambda must be >= 0");
  auto targets = td_targets(batch, target, spec, config.gamma);
  const auto forward = policy::forward_agents(spec, online, batch.steps());

  LossTerms out;
  out.td = td_from_forward(batch, forward, online, spec, std::move(targets));

  auto group = [&] {
    Tensor pi = forward.heads.pi;
    if (config.group_loss_scope == GroupLossScope::kPolicyOnly) {
      pi = policy::agent_q_values(batch.steps().windows, forward.messages.messages.detach(),
                                  online)
               .pi;
    }
    return group_terms(pi, spec.n_agents, batch.steps().partitions);
  };
  GroupTerms terms;
  if (config.lambda > 0.0) {
    terms = group();
    out.total = num::add(out.td, num::scale(terms.regularizer, config.lambda));
  } else {
    num::NoGradGuard no_grad;
    terms = group();
    out.total = out.td;
  }
  out.group_reg = terms.regularizer;
  out.group_raw = terms.raw;
  return out;
}

Learner::Learner(policy::ModelSpec spec, TrainConfig config, num::RngStream& init_rng)
    : spec_(std::move(spec)),
      config_(config),
      online_(policy::init_model_params(spec_, init_rng)),
      target_(online_.clone()) {}

LossReport Learner::train_step(const ReplayBuffer& buffer, num::RngStream& rng) {
  const auto episodes = buffer.sample(config_.batch_episodes, rng);
  TransitionBatch batch(episodes, spec_);
  auto terms = compute_losses(batch, online_, target_, spec_, config_);
  auto report = total_loss(terms.td.item(), terms.group_reg.item(), config_.lambda,
                           terms.group_raw);
  if (!std::isfinite(report.total)) {
    throw NumericalError("non-finite loss at update " + std::to_string(updates_ + 1));
  }
  online_.zero_grad();
  num::backward(terms.total);
  optimizer_step(online_, adam_, config_.adam());
  // A finite gradient can still overflow a parameter when the step size is huge.
  for (const auto& [name, t] : online_) {
    for (double x : t.values()) {
      if (!std::isfinite(x)) {
        throw NumericalError("non-finite value in parameter '" + name + "' after update " +
                             std::to_string(updates_ + 1));
      }
    }
  }
  ++updates_;
  if (config_.target_period > 0 && updates_ % config_.target_period == 0) {
    policy::target_sync(online_, target_);
  }
  return report;
}

}  // namespace gacg::train
