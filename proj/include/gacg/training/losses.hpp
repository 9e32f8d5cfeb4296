#pragma once

#include <cstddef>
#include <span>

#include "gacg/graph/graph_inference.hpp"
#include "gacg/numerics/tensor.hpp"

namespace gacg::train {

inline constexpr double kGroupEpsilon = 1e-8;

// Group distance ratio evaluated literally: the mean cross-group policy
// distance (summed over ordered group pairs, scaled by 1/(m-1)^2) over the
// mean within-group distance (ordered pairs incl. self, scaled by 1/m),
// denominator floored at kGroupEpsilon. m = 1 gives 0.
// `pi` is [n, |U|] row-major.
double group_distance_loss(std::span<const double> pi, std::size_t n,
                           const graph::GroupPartition& partition);
double group_distance_loss(const num::Tensor& pi, const graph::GroupPartition& partition);

// Trained form: within-group term over max(cross-group term, kGroupEpsilon),
// i.e. the exact reciprocal of group_distance_loss whenever both terms exceed
// the floor. Minimising it pulls groups together and pushes them apart.
// Differentiable in pi [n, |U|]. m = 1 gives 0.
num::Tensor group_regularizer(const num::Tensor& pi, const graph::GroupPartition& partition);

struct GroupTerms {
  num::Tensor regularizer;  // mean over timesteps, scalar
  double raw = 0.0;         // mean group_distance_loss over timesteps
};

// Both group quantities over B timesteps, pi [B*n, |U|]. Null partitions
// (grouping disabled) contribute 0.
GroupTerms group_terms(const num::Tensor& pi, std::size_t n,
                       std::span<const graph::GroupPartition* const> partitions);

struct LossReport {
  double total = 0.0;
  double td = 0.0;
  double group_raw = 0.0;
  double group_reg = 0.0;
  double lambda = 0.0;
};

// total = td + lambda * group_reg.
LossReport total_loss(double td, double group_reg, double lambda, double group_raw = 0.0);

}  // namespace gacg::train
