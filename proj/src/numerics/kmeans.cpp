#include "gacg/numerics/kmeans.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "gacg/numerics/errors.hpp"

namespace gacg::num {
namespace {

double sq_dist(const double* a, const double* b, std::size_t d) {
  double s = 0.0;
  for (std::size_t k = 0; k < d; ++k) {
    const double diff = a[k] - b[k];
    s += diff * diff;
  }
  return s;
}

std::vector<std::size_t> seed_centers(std::span<const double> points, std::size_t n,
                                      std::size_t d, std::size_t m, RngStream& rng) {
  std::vector<std::size_t> centers{static_cast<std::size_t>(rng.uniform_int(n))};
  std::vector<double> best(n, std::numeric_limits<double>::infinity());
  while (centers.size() < m) {
    const double* last = points.data() + centers.back() * d;
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      best[i] = std::min(best[i], sq_dist(points.data() + i * d, last, d));
      total += best[i];
    }
    std::size_t pick = n;
    if (total > 0.0) {
      const double r = rng.uniform() * total;
      double cum = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (best[i] == 0.0) continue;
        cum += best[i];
        pick = i;
        if (cum > r) break;
      }
    }
    if (pick == n) {
      // All remaining mass is zero (duplicate points): take the lowest unused index.
      for (std::size_t i = 0; i < n; ++i) {
        if (std::find(centers.begin(), centers.end(), i) == centers.end()) {
          pick = i;
          break;
        }
      }
    }
    centers.push_back(pick);
  }
  return centers;
}

}  // namespace

std::vector<std::size_t> kmeans(std::span<const double> points, std::size_t n, std::size_t d,
                                std::size_t m, RngStream& rng, KMeansOptions options) {
  if (m < 1 || m > n) {
    throw ParameterError("kmeans: group count m=" + std::to_string(m) + " outside [1, " +
                         std::to_string(n) + "]");
  }
  if (d < 1) throw ParameterError("kmeans: dimension must be >= 1");
  if (points.size() != n * d) {
    throw DimensionError("kmeans: expected " + std::to_string(n * d) + " values, got " +
                         std::to_string(points.size()));
  }

  std::vector<double> centroids(m * d);
  const auto seeds = seed_centers(points, n, d, m, rng);
  for (std::size_t c = 0; c < m; ++c) {
    std::copy_n(points.data() + seeds[c] * d, d, centroids.data() + c * d);
  }

  std::vector<std::size_t> labels(n, 0);
  std::vector<std::size_t> counts(m, 0);
  std::vector<double> next(m * d);
  for (std::size_t iter = 0; iter < options.max_iterations; ++iter) {
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < m; ++c) {
        const double dist = sq_dist(points.data() + i * d, centroids.data() + c * d, d);
        if (dist < best) {
          best = dist;
          labels[i] = c;
        }
      }
      ++counts[labels[i]];
    }

    // Reseed empty clusters with the point farthest from its own centroid.
    for (std::size_t c = 0; c < m; ++c) {
      if (counts[c] > 0) continue;
      std::size_t far = n;
      double far_dist = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (counts[labels[i]] < 2) continue;
        const double dist =
            sq_dist(points.data() + i * d, centroids.data() + labels[i] * d, d);
        if (dist > far_dist) {
          far_dist = dist;
          far = i;
        }
      }
      --counts[labels[far]];
      labels[far] = c;
      counts[c] = 1;
    }

    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < d; ++k) next[labels[i] * d + k] += points[i * d + k];
    }
    double movement = 0.0;
    for (std::size_t c = 0; c < m; ++c) {
      for (std::size_t k = 0; k < d; ++k) next[c * d + k] /= static_cast<double>(counts[c]);
      movement = std::max(movement,
                          std::sqrt(sq_dist(next.data() + c * d, centroids.data() + c * d, d)));
    }
    centroids.swap(next);
    if (movement < options.tolerance) break;
  }

  std::vector<std::size_t> remap(m, m);
  std::size_t used = 0;
  for (auto& l : labels) {
    if (remap[l] == m) remap[l] = used++;
    l = remap[l];
  }
  return labels;
}

}  // namespace gacg::num
