#include "gacg/training/optimizer.hpp"

#include <cmath>

#include "gacg/numerics/errors.hpp"

namespace gacg::train {

double clip_grad_norm(num::ParameterSet& params, double max_norm) {
  double ss = 0.0;
  for (const auto& [name, t] : params) {
    for (double g : t.grad()) {
      if (!std::isfinite(g)) {
        throw NumericalError("optimizer: non-finite gradient in parameter '" + name + "'");
      }
      ss += g * g;
    }
  }
  const double norm = std::sqrt(ss);
  if (max_norm > 0.0 && norm > max_norm) {
    const double factor = max_norm / norm;
    for (auto& [_, t] : params) {
      if (!t.has_grad()) continue;
      for (double& g : t.mutable_grad()) g *= factor;
    }
  }
  return norm;
}

StepStats optimizer_step(num::ParameterSet& params, AdamState& state,
                         const AdamConfig& config) {
  StepStats stats;
  stats.grad_norm = clip_grad_norm(params, config.clip_norm);
  stats.clipped = config.clip_norm > 0.0 && stats.grad_norm > config.clip_norm;

  ++state.t;
  const double t = static_cast<double>(state.t);
  const double bias1 = 1.0 - std::pow(config.beta1, t);
  const double bias2 = 1.0 - std::pow(config.beta2, t);
  for (auto& [name, tensor] : params) {
    auto& m = state.m[name];
    auto& v = state.v[name];
    if (m.empty()) {
      m.assign(tensor.numel(), 0.0);
      v.assign(tensor.numel(), 0.0);
    }
    auto values = tensor.mutable_values();
    const auto grad = tensor.grad();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double g = grad.empty() ? 0.0 : grad[i];
      m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g;
      v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g * g;
      const double m_hat = m[i] / bias1;
      const double v_hat = v[i] / bias2;
      values[i] -= config.lr * m_hat / (std::sqrt(v_hat) + config.eps);
    }
  }
  return stats;
}

}  // namespace gacg::train
