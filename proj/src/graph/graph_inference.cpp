#include "gacg/graph/graph_inference.hpp"

#include <algorithm>
#include <cmath>

#include "gacg/numerics/errors.hpp"
#include "gacg/numerics/kmeans.hpp"
#include "gacg/numerics/ops.hpp"

namespace gacg::graph {

using num::Shape;
using num::Tensor;

std::string to_string(EdgeMode mode) {
  switch (mode) {
    case EdgeMode::kGacg: return "gacg";
    case EdgeMode::kAttention: return "attention";
    case EdgeMode::kBernoulli: return "bernoulli";
    case EdgeMode::kIndeGaussian: return "inde_gaussian";
  }
  return "?";
}

EdgeMode parse_edge_mode(const std::string& name) {
  if (name == "gacg") return EdgeMode::kGacg;
  if (name == "attention") return EdgeMode::kAttention;
  if (name == "bernoulli") return EdgeMode::kBernoulli;
  if (name == "inde_gaussian") return EdgeMode::kIndeGaussian;
  throw ParameterError("unknown graph mode '" + name + "'");
}

std::string to_string(CovarianceKind kind) {
  return kind == CovarianceKind::kRank1 ? "rank1" : "block";
}

CovarianceKind parse_covariance(const std::string& name) {
  if (name == "rank1") return CovarianceKind::kRank1;
  if (name == "block") return CovarianceKind::kBlock;
  throw ParameterError("unknown covariance kind '" + name + "'");
}

void init_graph_params(num::ParameterSet& params, std::size_t obs_size,
                       const EncoderConfig& config, num::RngStream& rng) {
  params.add_uniform("encoder.fc1.w", {obs_size, config.hidden}, obs_size, rng);
  params.add_uniform("encoder.fc1.b", {config.hidden}, obs_size, rng);
  params.add_uniform("encoder.fc2.w", {config.hidden, config.d_h}, config.hidden, rng);
  params.add_uniform("encoder.fc2.b", {config.d_h}, config.hidden, rng);
  params.add_uniform("attention.wq", {config.d_h, config.d_k}, config.d_h, rng);
  params.add_uniform("attention.wk", {config.d_h, config.d_k}, config.d_h, rng);
}

Tensor encode_observations(const Tensor& obs, const num::ParameterSet& params) {
  const auto& w1 = params.at("encoder.fc1.w");
  if (obs.rank() != 2 || obs.dim(1) != w1.dim(0)) {
    throw DimensionError("encode_observations: observation shape " + num::shape_str(obs.shape()) +
                         " does not match encoder input width " + std::to_string(w1.dim(0)));
  }
  auto h = num::relu(num::add_bias(num::matmul(obs, w1), params.at("encoder.fc1.b")));
  return num::relu(
      num::add_bias(num::matmul(h, params.at("encoder.fc2.w")), params.at("encoder.fc2.b")));
}

Tensor agent_pair_means(const Tensor& encoded, std::size_t n, const num::ParameterSet& params) {
  if (n < 2) throw ParameterError("agent_pair_means: need at least 2 agents");
  if (encoded.rank() != 2 || encoded.dim(0) % n != 0) {
    throw DimensionError("agent_pair_means: encoded shape " + num::shape_str(encoded.shape()) +
                         " is not [B*n, d_h] for n=" + std::to_string(n));
  }
  const std::size_t batch = encoded.dim(0) / n;
  const auto& wq = params.at("attention.wq");
  const std::size_t d_k = wq.dim(1);
  auto q = num::reshape(num::matmul(encoded, wq), {batch, n, d_k});
  auto k = num::reshape(num::matmul(encoded, params.at("attention.wk")), {batch, n, d_k});
  auto scores = num::scale(num::bmm(q, num::transpose(k)), 1.0 / std::sqrt(double(d_k)));
  auto mu = num::sigmoid(scores);
  return num::scale(num::add(mu, num::transpose(mu)), 0.5);
}

std::vector<std::size_t> GroupPartition::group_sizes() const {
  std::vector<std::size_t> sizes(m, 0);
  for (auto l : labels) ++sizes.at(l);
  return sizes;
}

GroupPartition divide_groups(std::span<const double> windows, std::size_t n, std::size_t m,
                             std::size_t k, num::RngStream& rng) {
  if (m < 1 || m > n) {
    throw ParameterError("divide_groups: m=" + std::to_string(m) + " outside [1, " +
                         std::to_string(n) + "]");
  }
  if (k < 1) throw ParameterError("divide_groups: window length must be >= 1");
  if (n == 0 || windows.size() % n != 0) {
    throw DimensionError("divide_groups: window buffer is not n rows");
  }
  GroupPartition p;
  p.labels = num::kmeans(windows, n, windows.size() / n, m, rng);
  p.m = m;
  p.k = k;
  return p;
}

AgentGroupMatrix agent_group_matrix(const GroupPartition& partition) {
  const std::size_t n = partition.n();
  AgentGroupMatrix out{n, std::vector<double>(n * n, 0.0)};
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      out.values[i * n + j] = partition.labels[i] == partition.labels[j] ? 1.0 : 0.0;
    }
  }
  return out;
}

std::vector<double> EdgeGroupMatrix::materialize() const {
  const std::size_t e = factor.size();
  std::vector<double> out(e * e);
  for (std::size_t i = 0; i < e; ++i) {
    for (std::size_t j = 0; j < e; ++j) out[i * e + j] = factor[i] * factor[j];
  }
  return out;
}

EdgeGroupMatrix edge_group_matrix(const AgentGroupMatrix& m) { return {m.n, m.values}; }

std::vector<std::vector<double>> block_factors(const GroupPartition& partition) {
  const std::size_t n = partition.n();
  std::vector<std::vector<double>> out(partition.m, std::vector<double>(n * n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (partition.labels[i] == partition.labels[j]) {
        out[partition.labels[i]][i * n + j] = 1.0;
      }
    }
  }
  return out;
}

EdgeSample sample_edges(const EdgeDistribution& dist, num::RngStream& rng) {
  const std::size_t e = dist.mean.size();
  const auto n = static_cast<std::size_t>(std::llround(std::sqrt(double(e))));
  if (n * n != e || dist.cov_factor.size() != e) {
    throw DimensionError("sample_edges: mean/factor lengths are not n^2");
  }
  const double z = rng.normal();
  std::vector<double> values(e), residual(e);
  for (std::size_t i = 0; i < e; ++i) {
    residual[i] = z * dist.cov_factor[i];
    values[i] = dist.mean[i] + residual[i];
  }
  return {Tensor({n, n}, std::move(values)), {z}, std::move(residual)};
}

std::vector<double> draw_edge_noise(const GraphConfig& config, std::size_t n,
                                    std::size_t groups, num::RngStream& rng) {
  switch (config.mode) {
    case EdgeMode::kGacg:
      return num::standard_normal(
          rng, config.covariance == CovarianceKind::kRank1 ? 1 : std::max<std::size_t>(groups, 1));
    case EdgeMode::kAttention: return {};
    case EdgeMode::kBernoulli: {
      std::vector<double> u(n * n);
      for (auto& x : u) x = rng.uniform();
      return u;
    }
    case EdgeMode::kIndeGaussian: return num::standard_normal(rng, n * n);
  }
  return {};
}

std::vector<double> edge_offset(const GraphConfig& config, std::span<const double> mean,
                                const GroupPartition* partition,
                                std::span<const double> noise) {
  const std::size_t e = mean.size();
  std::vector<double> offset(e, 0.0);
  auto require_noise = [&](std::size_t count) {
    if (noise.size() != count) {
      throw DimensionError("edge_offset: expected " + std::to_string(count) +
                           " noise values for mode " + to_string(config.mode) + ", got " +
                           std::to_string(noise.size()));
    }
  };
  switch (config.mode) {
    case EdgeMode::kAttention: break;
    case EdgeMode::kGacg: {
      if (partition == nullptr) break;
      if (config.covariance == CovarianceKind::kRank1) {
        require_noise(1);
        const auto v = edge_group_matrix(agent_group_matrix(*partition)).factor;
        for (std::size_t i = 0; i < e; ++i) offset[i] = noise[0] * v[i];
      } else {
        require_noise(partition->m);
        const auto factors = block_factors(*partition);
        for (std::size_t g = 0; g < factors.size(); ++g) {
          for (std::size_t i = 0; i < e; ++i) offset[i] += noise[g] * factors[g][i];
        }
      }
      break;
    }
    case EdgeMode::kBernoulli:
      require_noise(e);
      for (std::size_t i = 0; i < e; ++i) {
        offset[i] = (noise[i] < mean[i] ? 1.0 : 0.0) - mean[i];
      }
      break;
    case EdgeMode::kIndeGaussian: {
      require_noise(e);
      const double sd = std::sqrt(config.sigma2);
      for (std::size_t i = 0; i < e; ++i) offset[i] = sd * noise[i];
      break;
    }
  }
  return offset;
}

Tensor edges_from_noise(const GraphConfig& config, const Tensor& mu,
                        std::span<const GroupPartition* const> partitions,
                        std::span<const std::vector<double>> noise) {
  if (mu.rank() != 3 || mu.dim(1) != mu.dim(2)) {
    throw DimensionError("edges_from_noise: mu must be [B,n,n], got " +
                         num::shape_str(mu.shape()));
  }
  const std::size_t batch = mu.dim(0), e = mu.dim(1) * mu.dim(2);
  if (partitions.size() != batch || noise.size() != batch) {
    throw DimensionError("edges_from_noise: per-timestep inputs do not match batch size");
  }
  std::vector<double> offsets(batch * e);
  for (std::size_t b = 0; b < batch; ++b) {
    const auto off = edge_offset(config, mu.values().subspan(b * e, e), partitions[b], noise[b]);
    std::copy(off.begin(), off.end(), offsets.begin() + static_cast<std::ptrdiff_t>(b * e));
  }
  return num::add(mu, Tensor(mu.shape(), std::move(offsets)));
}

EdgeSample ablation_edge_source(const GraphConfig& config, const Tensor& mu,
                                const GroupPartition* partition, num::RngStream& rng) {
  const std::size_t n = mu.dim(mu.rank() - 1);
  auto mu3 = num::reshape(mu, {1, n, n});
  const std::size_t groups = partition ? partition->m : 1;
  auto noise = draw_edge_noise(config, n, groups, rng);
  const GroupPartition* parts[] = {partition};
  std::vector<double> noise_list[] = {noise};
  auto edges = num::reshape(edges_from_noise(config, mu3, parts, noise_list), {n, n});
  auto residual = edge_offset(config, mu3.values(), partition, noise);
  return {std::move(edges), std::move(noise), std::move(residual)};
}

CoordinationGraph build_adjacency(const Tensor& edges, std::size_t n) {
  const std::size_t e = n * n;
  if (n == 0 || edges.numel() % e != 0) {
    throw DimensionError("build_adjacency: " + std::to_string(edges.numel()) +
                         " edges is not a multiple of n^2 for n=" + std::to_string(n));
  }
  const std::size_t batch = edges.numel() / e;
  auto c = num::clamp01(num::reshape(edges, {batch, n, n}));
  c = num::scale(num::add(c, num::transpose(c)), 0.5);
  c = num::with_unit_diagonal(c);
  auto inv_sqrt_degree = num::pow(num::sum_last(c), -0.5);
  auto normalized = num::scale_sym(c, inv_sqrt_degree);
  return {std::move(c), std::move(normalized)};
}

}  // namespace gacg::graph
