#pragma once

#include <cstddef>
#include <vector>

#include "gacg/numerics/parameter_set.hpp"
#include "gacg/numerics/rng.hpp"
#include "gacg/numerics/tensor.hpp"

namespace gacg::policy {

struct PolicyConfig {
  std::size_t gnn_layers = 2;
  std::size_t agent_hidden = 64;
  std::size_t mixer_embed = 32;
};

// Registers gnn.*, agent.* and mixer.* parameters.
void init_policy_params(num::ParameterSet& params, std::size_t window_width, std::size_t d_h,
                        std::size_t n_agents, std::size_t state_size, std::size_t n_actions,
                        const PolicyConfig& config, num::RngStream& rng);

struct MessageBatch {
  std::vector<num::Tensor> layers;  // H_1..H_L, each [B*n, d_h]
  num::Tensor messages;             // H_L
};

// L layers of H_l = ReLU(C_hat H_{l-1} W_{l-1}) with C_hat [B, n, n] and
// h0 [B*n, d_h].
MessageBatch gnn_forward(const num::Tensor& normalized, const num::Tensor& h0,
                         const num::ParameterSet& params);

struct AgentQOutput {
  num::Tensor q;   // [R, |U|]
  num::Tensor pi;  // softmax(q), temperature 1
};

// Shared per-agent head over (flattened observation window, message).
AgentQOutput agent_q_values(const num::Tensor& windows, const num::Tensor& messages,
                            const num::ParameterSet& params);

// Epsilon-greedy over q [n, |U|]: uniform action with probability epsilon,
// otherwise the argmax with ties going to the lowest index.
std::vector<int> select_actions(const num::Tensor& q, double epsilon, num::RngStream& rng);

struct MixerOutput {
  num::Tensor q_tot;   // [B]
  num::Tensor hidden;  // [B, embed]
  num::Tensor w1;      // |hyper_w1(s)|, [B, n, embed]
  num::Tensor w2;      // |hyper_w2(s)|, [B, embed]
  num::Tensor value;   // state bias V(s), [B]
};

// Monotonic QMIX mixer: state-conditioned non-negative weights combine the
// chosen per-agent values q_chosen [B, n] into Q_tot.
MixerOutput mix(const num::Tensor& q_chosen, const num::Tensor& states,
                const num::ParameterSet& params);

// Hard copy online -> target; names and shapes must match.
void target_sync(const num::ParameterSet& online, num::ParameterSet& target);

}  // namespace gacg::policy
