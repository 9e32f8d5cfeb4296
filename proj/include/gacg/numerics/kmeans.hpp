#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "gacg/numerics/rng.hpp"

namespace gacg::num {

struct KMeansOptions {
  std::size_t max_iterations = 50;
  double tolerance = 1e-9;  // max centroid movement that counts as converged
};

// Lloyd's algorithm with k-means++ seeding over n points of dimension d
// (row-major `points`). Returns one label in [0, m) per point; every label is
// used. Labels are renumbered in order of first appearance, so point 0 always
// gets label 0.
std::vector<std::size_t> kmeans(std::span<const double> points, std::size_t n, std::size_t d,
                                std::size_t m, RngStream& rng, KMeansOptions options = {});

}  // namespace gacg::num
