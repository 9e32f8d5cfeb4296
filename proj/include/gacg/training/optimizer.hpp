#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "gacg/numerics/parameter_set.hpp"

namespace gacg::train {

struct AdamConfig {
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_norm = 10.0;  // global gradient-norm clip; <= 0 disables
};

struct AdamState {
  std::map<std::string, std::vector<double>> m;
  std::map<std::string, std::vector<double>> v;
  std::uint64_t t = 0;
};

struct StepStats {
  double grad_norm = 0.0;  // before clipping
  bool clipped = false;
};

// One Adam update from the grads currently held by `params`. Parameters
// without a grad are treated as having a zero gradient. Throws
// NumericalError naming the first parameter with a non-finite gradient.
StepStats optimizer_step(num::ParameterSet& params, AdamState& state,
                         const AdamConfig& config);

// Scales all grads in place so their global L2 norm is at most max_norm.
// Returns the norm before scaling.
double clip_grad_norm(num::ParameterSet& params, double max_norm);

}  // namespace gacg::train
