#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "gacg/numerics/parameter_set.hpp"
#include "gacg/numerics/rng.hpp"
#include "gacg/numerics/tensor.hpp"

namespace gacg::graph {

// Source of the sampled coordination-graph edges.
enum class EdgeMode {
  kGacg,          // N(mu, vec(M) vec(M)^T), group-correlated
  kAttention,     // e = mu, no sampling
  kBernoulli,     // e_ij ~ Bernoulli(mu_ij), straight-through gradient
  kIndeGaussian,  // e_ij ~ N(mu_ij, sigma2) independently
};

enum class CovarianceKind {
  kRank1,  // vec(M) vec(M)^T, one shared noise scalar
  kBlock,  // sum over groups of v_g v_g^T, one noise scalar per group
};

std::string to_string(EdgeMode mode);
EdgeMode parse_edge_mode(const std::string& name);
std::string to_string(CovarianceKind kind);
CovarianceKind parse_covariance(const std::string& name);

struct GraphConfig {
  EdgeMode mode = EdgeMode::kGacg;
  double sigma2 = 0.25;
  CovarianceKind covariance = CovarianceKind::kRank1;
};

struct EncoderConfig {
  std::size_t hidden = 64;
  std::size_t d_h = 32;
  std::size_t d_k = 32;
};

// Registers encoder.* and attention.* parameters.
void init_graph_params(num::ParameterSet& params, std::size_t obs_size,
                       const EncoderConfig& config, num::RngStream& rng);

// Shared two-layer ReLU MLP applied to every row of obs [R, d_obs] -> [R, d_h].
num::Tensor encode_observations(const num::Tensor& obs, const num::ParameterSet& params);

// Scaled dot-product attention scores between the n agents of each of the B
// timesteps in encoded [B*n, d_h], squashed by a sigmoid and symmetrised.
// Returns mu [B, n, n].
num::Tensor agent_pair_means(const num::Tensor& encoded, std::size_t n,
                             const num::ParameterSet& params);

struct GroupPartition {
  std::vector<std::size_t> labels;
  std::size_t m = 1;
  std::size_t k = 1;

  std::size_t n() const { return labels.size(); }
  std::vector<std::size_t> group_sizes() const;
};

// Clusters the n flattened observation windows (row-major [n, width]) into m
// groups with k-means.
GroupPartition divide_groups(std::span<const double> windows, std::size_t n, std::size_t m,
                             std::size_t k, num::RngStream& rng);

struct AgentGroupMatrix {
  std::size_t n = 0;
  std::vector<double> values;  // row-major n x n, 0/1

  double at(std::size_t i, std::size_t j) const { return values[i * n + j]; }
};

AgentGroupMatrix agent_group_matrix(const GroupPartition& partition);

// vec(M) vec(M)^T kept in factored form; `factor` is vec(M) row-major.
struct EdgeGroupMatrix {
  std::size_t n = 0;
  std::vector<double> factor;

  double at(std::size_t i, std::size_t j) const { return factor[i] * factor[j]; }
  // Explicit n^2 x n^2 matrix, only for small n.
  std::vector<double> materialize() const;
};

EdgeGroupMatrix edge_group_matrix(const AgentGroupMatrix& m);

// Per-group factors v_g with v_g[i*n+j] = 1 iff agents i and j are both in g.
std::vector<std::vector<double>> block_factors(const GroupPartition& partition);

struct EdgeDistribution {
  std::vector<double> mean;        // vec(mu), length n^2
  std::vector<double> cov_factor;  // v, Sigma = v v^T
};

struct EdgeSample {
  num::Tensor edges;             // [n, n]
  std::vector<double> noise;     // raw draws, enough to replay the sample
  std::vector<double> residual;  // e - mu as drawn, before rounding into e
};

// Exact degenerate Gaussian sample e = mu + z v with scalar z ~ N(0,1).
EdgeSample sample_edges(const EdgeDistribution& dist, num::RngStream& rng);

// Raw noise for one timestep: {z} (gacg rank-1), one z per group (gacg block),
// n^2 uniforms (bernoulli), n^2 normals (inde-gaussian), nothing (attention).
std::vector<double> draw_edge_noise(const GraphConfig& config, std::size_t n,
                                    std::size_t groups, num::RngStream& rng);

// Additive offset e - mu for one timestep given the stored raw noise.
// `mean` is vec(mu); `partition` may be null only when grouping is disabled.
std::vector<double> edge_offset(const GraphConfig& config, std::span<const double> mean,
                                const GroupPartition* partition,
                                std::span<const double> noise);

// e = mu + offset for every timestep of mu [B, n, n]; dE/dmu = I in all modes.
num::Tensor edges_from_noise(const GraphConfig& config, const num::Tensor& mu,
                             std::span<const GroupPartition* const> partitions,
                             std::span<const std::vector<double>> noise);

// Draws noise and builds edges for a single timestep, mu [n, n] or [1, n, n].
EdgeSample ablation_edge_source(const GraphConfig& config, const num::Tensor& mu,
                                const GroupPartition* partition, num::RngStream& rng);

struct CoordinationGraph {
  num::Tensor adjacency;   // C [B, n, n]
  num::Tensor normalized;  // D^-1/2 C D^-1/2 [B, n, n]
};

// Reshape to [B, n, n], clamp to [0,1], symmetrise, force unit diagonal and
// apply symmetric degree normalisation.
CoordinationGraph build_adjacency(const num::Tensor& edges, std::size_t n);

}  // namespace gacg::graph
