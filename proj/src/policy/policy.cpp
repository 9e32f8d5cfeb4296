#include "gacg/policy/policy.hpp"

#include <string>

#include "gacg/numerics/errors.hpp"
#include "gacg/numerics/ops.hpp"

namespace gacg::policy {

using num::Tensor;

void init_policy_params(num::ParameterSet& params, std::size_t window_width, std::size_t d_h,
                        std::size_t n_agents, std::size_t state_size, std::size_t n_actions,
                        const PolicyConfig& config, num::RngStream& rng) {
  for (std::size_t l = 0; l < config.gnn_layers; ++l) {
    params.add_uniform("gnn.w" + std::to_string(l), {d_h, d_h}, d_h, rng);
  }

  const std::size_t hidden = config.agent_hidden;
  const std::size_t fan_in = window_width + d_h;
  params.add_uniform("agent.fc1_obs.w", {window_width, hidden}, fan_in, rng);
  params.add_uniform("agent.fc1_msg.w", {d_h, hidden}, fan_in, rng);
  params.add_uniform("agent.fc1.b", {hidden}, fan_in, rng);
  params.add_uniform("agent.fc2.w", {hidden, n_actions}, hidden, rng);
  params.add_uniform("agent.fc2.b", {n_actions}, hidden, rng);

  const std::size_t embed = config.mixer_embed;
  params.add_uniform("mixer.hyper_w1.w", {state_size, n_agents * embed}, state_size, rng);
  params.add_uniform("mixer.hyper_w1.b", {n_agents * embed}, state_size, rng);
  params.add_uniform("mixer.hyper_b1.w", {state_size, embed}, state_size, rng);
  params.add_uniform("mixer.hyper_b1.b", {embed}, state_size, rng);
  params.add_uniform("mixer.hyper_w2.w", {state_size, embed}, state_size, rng);
  params.add_uniform("mixer.hyper_w2.b", {embed}, state_size, rng);
  params.add_uniform("mixer.v1.w", {state_size, embed}, state_size, rng);
  params.add_uniform("mixer.v1.b", {embed}, state_size, rng);
  params.add_uniform("mixer.v2.w", {embed, 1}, embed, rng);
  params.add_uniform("mixer.v2.b", {1}, embed, rng);
}

MessageBatch gnn_forward(const Tensor& normalized, const Tensor& h0,
                         const num::ParameterSet& params) {
  if (normalized.rank() != 3 || h0.rank() != 2 ||
      normalized.dim(0) * normalized.dim(1) != h0.dim(0)) {
    throw DimensionError("gnn_forward: graph " + num::shape_str(normalized.shape()) +
                         " does not match features " + num::shape_str(h0.shape()));
  }
  const std::size_t batch = normalized.dim(0), n = normalized.dim(1);
  MessageBatch out;
  Tensor h = h0;
  for (std::size_t l = 0; params.contains("gnn.w" + std::to_string(l)); ++l) {
    const auto& w = params.at("gnn.w" + std::to_string(l));
    const std::size_t d = h.dim(1);
    if (w.dim(0) != d) {
      throw DimensionError("gnn_forward: layer " + std::to_string(l) + " expects width " +
                           std::to_string(w.dim(0)) + ", got " + std::to_string(d));
    }
    auto propagated = num::reshape(num::bmm(normalized, num::reshape(h, {batch, n, d})),
                                   {batch * n, d});
    h = num::relu(num::matmul(propagated, w));
    out.layers.push_back(h);
  }
  out.messages = h;
  return out;
}

AgentQOutput agent_q_values(const Tensor& windows, const Tensor& messages,
                            const num::ParameterSet& params) {
  const auto& w_obs = params.at("agent.fc1_obs.w");
  if (windows.rank() != 2 || windows.dim(1) != w_obs.dim(0)) {
    throw DimensionError("agent_q_values: window shape " + num::shape_str(windows.shape()) +
                         " does not match head input width " + std::to_string(w_obs.dim(0)));
  }
  auto pre = num::add(num::matmul(windows, w_obs),
                      num::matmul(messages, params.at("agent.fc1_msg.w")));
  auto hidden = num::relu(num::add_bias(pre, params.at("agent.fc1.b")));
  auto q = num::add_bias(num::matmul(hidden, params.at("agent.fc2.w")), params.at("agent.fc2.b"));
  auto pi = num::softmax_rows(q);
  return {std::move(q), std::move(pi)};
}

std::vector<int> select_actions(const Tensor& q, double epsilon, num::RngStream& rng) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) {
    throw ParameterError("select_actions: epsilon must be in [0, 1]");
  }
  if (q.rank() != 2) throw DimensionError("select_actions: q must be [n, |U|]");
  const std::size_t n = q.dim(0), actions = q.dim(1);
  std::vector<int> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (epsilon > 0.0 && rng.uniform() < epsilon) {
      out[i] = static_cast<int>(rng.uniform_int(actions));
      continue;
    }
    std::size_t best = 0;
    for (std::size_t a = 1; a < actions; ++a) {
      if (q.at(i, a) > q.at(i, best)) best = a;
    }
    out[i] = static_cast<int>(best);
  }
  return out;
}

MixerOutput mix(const Tensor& q_chosen, const Tensor& states, const num::ParameterSet& params) {
  if (q_chosen.rank() != 2 || states.rank() != 2 || q_chosen.dim(0) != states.dim(0)) {
    throw DimensionError("mix: q " + num::shape_str(q_chosen.shape()) + " vs state " +
                         num::shape_str(states.shape()));
  }
  const std::size_t batch = q_chosen.dim(0), n = q_chosen.dim(1);
  const std::size_t embed = params.at("mixer.hyper_b1.b").dim(0);
  auto hyper = [&](const std::string& name) {
    return num::add_bias(num::matmul(states, params.at(name + ".w")), params.at(name + ".b"));
  };

  MixerOutput out;
  out.w1 = num::reshape(num::abs(hyper("mixer.hyper_w1")), {batch, n, embed});
  auto b1 = hyper("mixer.hyper_b1");
  auto mixed = num::reshape(num::bmm(num::reshape(q_chosen, {batch, 1, n}), out.w1),
                            {batch, embed});
  out.hidden = num::elu(num::add(mixed, b1));
  out.w2 = num::abs(hyper("mixer.hyper_w2"));
  auto v_hidden = num::relu(hyper("mixer.v1"));
  out.value = num::reshape(
      num::add_bias(num::matmul(v_hidden, params.at("mixer.v2.w")), params.at("mixer.v2.b")),
      {batch});
  out.q_tot = num::add(num::sum_last(num::mul(out.hidden, out.w2)), out.value);
  return out;
}

void target_sync(const num::ParameterSet& online, num::ParameterSet& target) {
  target.copy_values_from(online);
}

}  // namespace gacg::policy
