#include "gacg/training/losses.hpp"

#include <algorithm>
#include <cmath>

#include "gacg/numerics/errors.hpp"
#include "gacg/numerics/ops.hpp"

namespace gacg::train {
namespace {

double row_distance(std::span<const double> pi, std::size_t actions, std::size_t a,
                    std::size_t b) {
  double ss = 0.0;
  for (std::size_t u = 0; u < actions; ++u) {
    const double d = pi[a * actions + u] - pi[b * actions + u];
    ss += d * d;
  }
  return std::sqrt(ss);
}

// Coefficients that turn the pairwise distance matrix into the cross-group
// and within-group terms.
void pair_weights(const graph::GroupPartition& p, std::span<double> inter,
                  std::span<double> intra) {
  const std::size_t n = p.n(), m = p.m;
  if (m <= 1) return;
  const auto sizes = p.group_sizes();
  const double cross_scale = 1.0 / static_cast<double>((m - 1) * (m - 1));
  const double within_scale = 1.0 / static_cast<double>(m);
  for (std::size_t l = 0; l < n; ++l) {
    for (std::size_t k = 0; k < n; ++k) {
      const double gl = static_cast<double>(sizes[p.labels[l]]);
      const double gk = static_cast<double>(sizes[p.labels[k]]);
      if (p.labels[l] == p.labels[k]) {
        intra[l * n + k] = within_scale / (gl * gl);
      } else {
        inter[l * n + k] = cross_scale / (gl * gk);
      }
    }
  }
}

}  // namespace

double group_distance_loss(std::span<const double> pi, std::size_t n,
                           const graph::GroupPartition& partition) {
  if (n == 0 || pi.size() % n != 0 || partition.n() != n) {
    throw DimensionError("group_distance_loss: policy rows do not match partition");
  }
  const std::size_t m = partition.m;
  if (m <= 1) return 0.0;
  const std::size_t actions = pi.size() / n;

  std::vector<std::vector<std::size_t>> members(m);
  for (std::size_t i = 0; i < n; ++i) members.at(partition.labels[i]).push_back(i);

  double numerator = 0.0;
  for (std::size_t g = 0; g < m; ++g) {
    for (std::size_t h = 0; h < m; ++h) {
      if (g == h || members[g].empty() || members[h].empty()) continue;
      double s = 0.0;
      for (auto l : members[g]) {
        for (auto k : members[h]) s += row_distance(pi, actions, l, k);
      }
      numerator += s / static_cast<double>(members[g].size() * members[h].size());
    }
  }
  numerator /= static_cast<double>((m - 1) * (m - 1));

  double denominator = 0.0;
  for (const auto& g : members) {
    if (g.empty()) continue;
    double s = 0.0;
    for (auto l : g) {
      for (auto v : g) s += row_distance(pi, actions, l, v);
    }
    denominator += s / static_cast<double>(g.size() * g.size());
  }
  denominator /= static_cast<double>(m);

  return numerator / std::max(denominator, kGroupEpsilon);
}

double group_distance_loss(const num::Tensor& pi, const graph::GroupPartition& partition) {
  return group_distance_loss(pi.values(), pi.dim(0), partition);
}

GroupTerms group_terms(const num::Tensor& pi, std::size_t n,
                       std::span<const graph::GroupPartition* const> partitions) {
  if (pi.rank() != 2 || n == 0 || pi.dim(0) != n * partitions.size()) {
    throw DimensionError("group_terms: pi " + num::shape_str(pi.shape()) + " does not hold " +
                         std::to_string(partitions.size()) + " timesteps of " +
                         std::to_string(n) + " agents");
  }
  const std::size_t steps = partitions.size(), actions = pi.dim(1);
  std::vector<double> inter(steps * n * n, 0.0), intra(steps * n * n, 0.0);
  double raw = 0.0;
  for (std::size_t b = 0; b < steps; ++b) {
    const auto* p = partitions[b];
    if (p == nullptr) continue;
    pair_weights(*p, std::span(inter).subspan(b * n * n, n * n),
                 std::span(intra).subspan(b * n * n, n * n));
    raw += group_distance_loss(pi.values().subspan(b * n * actions, n * actions), n, *p);
  }

  auto dist = num::reshape(num::pairwise_l2(num::reshape(pi, {steps, n, actions})),
                           {steps, n * n});
  auto cross = num::sum_last(num::mul(dist, num::Tensor({steps, n * n}, std::move(inter))));
  auto within = num::sum_last(num::mul(dist, num::Tensor({steps, n * n}, std::move(intra))));
  auto per_step = num::div(within, num::floor_at(cross, kGroupEpsilon));
  return {num::mean(per_step), raw / static_cast<double>(steps)};
}

num::Tensor group_regularizer(const num::Tensor& pi, const graph::GroupPartition& partition) {
  const graph::GroupPartition* parts[] = {&partition};
  return group_terms(pi, pi.dim(0), parts).regularizer;
}

LossReport total_loss(double td, double group_reg, double lambda, double group_raw) {
  if (!(lambda >= 0.0)) throw ParameterError("total_loss: lambda must be >= 0");
  return {td + lambda * group_reg, td, group_raw, group_reg, lambda};
}

}  // namespace gacg::train
