// Runs the nine acceptance criteria in order and prints one PASS/FAIL line
// for each. The process exits non-zero if any criterion fails.

#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "gacg/graph/graph_inference.hpp"
#include "gacg/harness/ablation.hpp"
#include "gacg/harness/checkpoint.hpp"
#include "gacg/harness/config.hpp"
#include "gacg/harness/runner.hpp"
#include "gacg/policy/policy.hpp"
#include "gacg/training/losses.hpp"
#include "support/fixtures.hpp"

using namespace gacg;
using namespace gacg::harness;
namespace fs = std::filesystem;
using num::Tensor;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double x, int precision = 4) {
  std::ostringstream os;
  os.precision(precision);
  os << x;
  return os.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const fs::path kWorkDir = GACG_ACCEPTANCE_DIR;

// 1. Three agents split 2/1: sample statistics and per-sample residual structure.
Outcome edge_distribution() {
  const auto t0 = std::chrono::steady_clock::now();
  const graph::GroupPartition split{{0, 0, 1}, 2, 1};
  const auto v = graph::edge_group_matrix(graph::agent_group_matrix(split)).factor;
  num::RngStream rng(1001, 0);
  std::vector<double> mu(9);
  for (auto& x : mu) x = rng.uniform();

  const int samples = 10000;
  std::vector<double> sum(9, 0.0), cross(81, 0.0);
  bool structure_ok = true;
  for (int t = 0; t < samples; ++t) {
    const auto s = graph::sample_edges({mu, v}, rng);
    const double shared = s.noise[0];
    for (std::size_t i = 0; i < 9; ++i) {
      const double r = s.residual[i];
      structure_ok &= v[i] == 1.0 ? r == shared : r == 0.0;
      structure_ok &= s.edges.at(i) == mu[i] + r;
      sum[i] += s.edges.at(i);
      for (std::size_t j = 0; j < 9; ++j) cross[i * 9 + j] += s.edges.at(i) * s.edges.at(j);
    }
  }
  double mean_err = 0.0, cov_err = 0.0;
  for (std::size_t i = 0; i < 9; ++i) {
    const double mi = sum[i] / samples;
    mean_err = std::max(mean_err, std::abs(mi - mu[i]));
    for (std::size_t j = 0; j < 9; ++j) {
      const double cov = cross[i * 9 + j] / samples - mi * (sum[j] / samples);
      cov_err = std::max(cov_err, std::abs(cov - v[i] * v[j]));
    }
  }
  const double elapsed = seconds_since(t0);
  return {mean_err <= 0.05 && cov_err <= 0.05 && structure_ok && elapsed < 5.0,
          "max mean error " + fmt(mean_err) + ", max covariance error " + fmt(cov_err) +
              ", residual structure " + (structure_ok ? "exact" : "violated") + ", " +
              fmt(elapsed, 3) + " s"};
}

// 2. Encoder to total loss, 20 random parameter points with fixed noise.
Outcome gradient_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto r = testing::full_chain_grad_check(0, 20);
  const double elapsed = seconds_since(t0);
  return {r.worst.max_relative_error <= 1e-5 && elapsed < 60.0,
          "max relative error " + fmt(r.worst.max_relative_error, 3) + " at " +
              r.worst.worst_parameter + "[" + std::to_string(r.worst.worst_index) + "] over " +
              std::to_string(r.points) + " points, " + fmt(elapsed, 3) + " s"};
}

Tensor rows(const std::vector<std::vector<double>>& r) {
  std::vector<double> flat;
  for (const auto& x : r) flat.insert(flat.end(), x.begin(), x.end());
  return Tensor({r.size(), r[0].size()}, flat);
}

// 3. Hand-computed group ratio and its degenerate cases.
Outcome group_ratio() {
  const graph::GroupPartition two{{0, 0, 1, 1}, 2, 1};
  const graph::GroupPartition one{{0, 0, 0, 0}, 1, 1};
  const auto hand = rows({{1, 0}, {0.8, 0.2}, {0, 1}, {0.2, 0.8}});
  const auto same = rows({{0.3, 0.7}, {0.3, 0.7}, {0.3, 0.7}, {0.3, 0.7}});
  const double ratio = train::group_distance_loss(hand, two);
  const double reg = train::group_regularizer(hand, two).item();
  const double single = train::group_distance_loss(hand, one);
  const double single_reg = train::group_regularizer(hand, one).item();
  const double identical = train::group_distance_loss(same, two);
  const double identical_reg = train::group_regularizer(same, two).item();
  const bool ok = std::abs(ratio - 16.0) <= 1e-9 && std::abs(reg - 0.0625) <= 1e-9 &&
                  single == 0.0 && single_reg == 0.0 && identical == 0.0 && identical_reg == 0.0;
  return {ok, "ratio " + fmt(ratio, 12) + ", regularizer " + fmt(reg, 12) + ", m=1 gives " +
                  fmt(single) + "/" + fmt(single_reg) + ", identical policies give " +
                  fmt(identical) + "/" + fmt(identical_reg)};
}

// 4. Central differences of Q_tot in every agent value over 200 random probes.
Outcome mixer_monotonicity() {
  num::RngStream rng(1004, 0);
  const std::size_t n = 6, state = 12;
  double worst = INFINITY;
  for (int probe = 0; probe < 200; ++probe) {
    num::ParameterSet p;
    policy::init_policy_params(p, 8, 6, n, state, 5, {2, 16, 8}, rng);
    const auto s = testing::random_tensor({1, state}, rng, -2.0, 2.0);
    std::vector<double> q(n);
    for (auto& x : q) x = -10.0 + 20.0 * rng.uniform();
    auto q_tot = [&](const std::vector<double>& values) {
      return policy::mix(Tensor({1, n}, values), s, p).q_tot.item();
    };
    for (std::size_t i = 0; i < n; ++i) {
      auto up = q, down = q;
      up[i] += 1e-6;
      down[i] -= 1e-6;
      worst = std::min(worst, (q_tot(up) - q_tot(down)) / 2e-6);
    }
  }
  return {worst >= -1e-9, "smallest finite-difference slope " + fmt(worst, 6) + " over 200 probes"};
}

// 5. Perturbing one block of a block-diagonal graph must not move the other block.
Outcome graph_gating() {
  num::RngStream rng(1005, 0);
  num::ParameterSet p;
  policy::init_policy_params(p, 8, 6, 6, 12, 5, {2, 16, 8}, rng);
  const std::size_t n = 6, d = 6;
  std::vector<double> g(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i / 3 == j / 3) g[i * n + j] = 1.0 / 3.0;
    }
  }
  const Tensor graph({1, n, n}, g);
  const auto h0 = testing::random_tensor({n, d}, rng, 0.0, 1.0);
  const auto base = policy::gnn_forward(graph, h0, p).messages;
  double max_leak = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t j = trial % n;
    std::vector<double> moved(h0.values().begin(), h0.values().end());
    for (std::size_t c = 0; c < d; ++c) moved[j * d + c] += rng.normal();
    const auto out = policy::gnn_forward(graph, Tensor({n, d}, moved), p).messages;
    for (std::size_t i = 0; i < n; ++i) {
      if (i / 3 == j / 3) continue;
      for (std::size_t c = 0; c < out.dim(1); ++c) {
        max_leak = std::max(max_leak, std::abs(out.at(i * out.dim(1) + c) -
                                               base.at(i * out.dim(1) + c)));
      }
    }
  }
  return {max_leak == 0.0, "largest cross-block change " + fmt(max_leak)};
}

RunConfig base_config(std::uint64_t seed, const std::string& out) {
  RunConfig c;
  c.seed = seed;
  c.output_dir = (kWorkDir / out).string();
  finalize(c);
  return c;
}

// 6. Two identical 10k-step runs, compared byte for byte. The first run keeps
// a checkpoint at 5000 steps that criterion 9 resumes from.
std::string determinism_run_dir;

Outcome determinism() {
  std::vector<std::string> csv;
  for (const char* out : {"det_a", "det_b"}) {
    auto c = base_config(0, out);
    c.train.total_steps = 10000;
    c.train.checkpoint_interval = 5000;
    const auto r = run_training(c);
    csv.push_back(slurp(r.metrics_path));
    if (determinism_run_dir.empty()) determinism_run_dir = r.run_dir;
  }
  const bool same = !csv[0].empty() && csv[0] == csv[1];
  return {same, std::string("metrics files ") + (same ? "identical" : "differ") + " (" +
                    std::to_string(csv[0].size()) + " bytes)"};
}

// Final capture rates of full-length runs, shared between criteria 7 and 8.
std::map<std::string, std::vector<double>> final_rates;
constexpr std::uint64_t kSeeds = 5;

// 7. Default configuration, 50k steps, five seeds against a random policy.
Outcome learning() {
  bool ok = true;
  std::string detail;
  for (std::uint64_t seed = 0; seed < kSeeds; ++seed) {
    const auto c = base_config(seed, "learning");
    const auto r = run_training(c);
    const double trained = final_capture_rate(r.rows, 5);
    const double random =
        evaluate_checkpoint(r.final_checkpoint, 200, 9000 + seed, true).result.capture_rate;
    const bool seed_ok = trained >= 1.5 * random && random < trained && r.wallclock_s <= 900.0;
    ok &= seed_ok;
    final_rates["gacg"].push_back(trained);
    detail += (seed ? "; " : "") + std::string("seed ") + std::to_string(seed) + " " +
              fmt(trained, 3) + " vs random " + fmt(random, 3) + " in " + fmt(r.wallclock_s, 4) +
              " s";
    std::cout << "  criterion 7 seed " << seed << ": trained " << fmt(trained, 3) << ", random "
              << fmt(random, 3) << ", " << fmt(r.wallclock_s, 4) << " s" << std::endl;
  }
  return {ok, detail};
}

// 8. Full-length attention-only and no-group-loss baselines over five seeds,
// plus shorter runs of every remaining distribution mode and sweep value.
Outcome ablation() {
  RunConfig base = base_config(0, "ablation");
  const auto dist = ablation_variants(base, AblationAxis::kDistribution);
  for (const auto& v : dist) {
    if (v.name != "attention" && v.name != "gacg_no_lg") continue;
    for (std::uint64_t seed = 0; seed < kSeeds; ++seed) {
      auto c = v.config;
      c.seed = seed;
      final_rates[v.name].push_back(final_capture_rate(run_training(c).rows, 5));
      std::cout << "  criterion 8 " << v.name << " seed " << seed << ": "
                << fmt(final_rates[v.name].back(), 3) << std::endl;
    }
  }
  int wins = 0;
  std::string detail;
  for (std::size_t s = 0; s < kSeeds; ++s) {
    const double g = final_rates["gacg"].at(s);
    const double a = final_rates["attention"].at(s);
    const double z = final_rates["gacg_no_lg"].at(s);
    wins += g >= a && g >= z;
    detail += (s ? "; " : "") + std::string("seed ") + std::to_string(s) + " " + fmt(g, 3) +
              "/" + fmt(a, 3) + "/" + fmt(z, 3);
  }

  std::vector<std::string> failures;
  std::size_t completed = 0;
  auto short_run = [&](const Variant& v) {
    auto c = v.config;
    c.output_dir = (kWorkDir / "sweeps").string();
    c.run_id = v.name;
    c.train.total_steps = 3000;
    c.train.epsilon_anneal_steps = 1500;
    try {
      const auto r = run_training(c);
      completed += !r.rows.empty();
    } catch (const std::exception& e) {
      failures.push_back(v.name + ": " + e.what());
    }
  };
  for (const auto& v : dist) short_run(v);
  for (auto axis : {AblationAxis::kGroupCount, AblationAxis::kWindowLength}) {
    for (const auto& v : ablation_variants(base, axis)) short_run(v);
  }
  const bool ok = wins >= 3 && failures.empty();
  detail = "gacg/attention/no_lg final capture " + detail + "; gacg at or above both on " +
           std::to_string(wins) + " of 5 seeds; " + std::to_string(completed) +
           " short variant runs completed";
  for (const auto& f : failures) detail += "; failed " + f;
  return {ok, detail};
}

// 9. Bit-exact checkpoint round trip and a resumed run that matches the
// uninterrupted one after the resume point.
Outcome persistence() {
  auto c = base_config(0, "persist");
  num::RngStream rng(1009, 0);
  const auto params = policy::init_model_params(c.model_spec(), rng);
  const auto dir = (kWorkDir / "persist" / "roundtrip").string();
  save_checkpoint(params, c, 42, dir);
  const auto loaded = load_checkpoint(dir);
  bool exact = loaded.step == 42 && loaded.params.names() == params.names();
  for (const auto& [name, t] : params) {
    const auto& u = loaded.params.at(name);
    exact &= u.shape() == t.shape() &&
             std::memcmp(u.values().data(), t.values().data(), t.numel() * sizeof(double)) == 0;
  }

  if (determinism_run_dir.empty()) return {false, "no checkpointed run available"};
  std::string resume_dir;
  std::uint64_t resume_step = 0;
  for (const auto& entry : fs::directory_iterator(fs::path(determinism_run_dir) / "checkpoints")) {
    const auto name = entry.path().filename().string();
    if (name.rfind("step_", 0) == 0) {
      const auto step = std::stoull(name.substr(5));
      if (resume_dir.empty() || step < resume_step) {
        resume_dir = entry.path().string();
        resume_step = step;
      }
    }
  }
  if (resume_dir.empty()) return {false, "no intermediate checkpoint found"};

  auto resumed_config = load_checkpoint(resume_dir).config;
  resumed_config.output_dir = (kWorkDir / "persist" / "resumed").string();
  RunOptions options;
  options.resume_from = resume_dir;
  const auto resumed = run_training(resumed_config, options);
  const auto reference = read_metrics((fs::path(determinism_run_dir) / "metrics.csv").string());

  std::vector<std::string> a, b;
  for (const auto& row : reference) {
    if (row.step > resume_step) a.push_back(format_metrics_row(row));
  }
  for (const auto& row : resumed.rows) b.push_back(format_metrics_row(row));
  const bool match = !a.empty() && a == b;
  return {exact && match, std::string("round trip ") + (exact ? "bit-exact" : "differs") +
                              ", resumed from step " + std::to_string(resume_step) + ", " +
                              std::to_string(b.size()) + " rows after resume " +
                              (match ? "match" : "differ from") + " the uninterrupted run"};
}

}  // namespace

int main() {
  spdlog::set_level(spdlog::level::err);
  fs::remove_all(kWorkDir);
  fs::create_directories(kWorkDir);

  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"edge distribution fidelity", edge_distribution},
      {"full-chain gradient oracle", gradient_oracle},
      {"group ratio exactness", group_ratio},
      {"mixer monotonicity", mixer_monotonicity},
      {"graph gating", graph_gating},
      {"training determinism", determinism},
      {"learning at desk scale", learning},
      {"directional ablation", ablation},
      {"persistence and resume", persistence},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << "criterion " << i + 1 << " (" << criteria[i].first
              << "): " << (o.pass ? "PASS" : "FAIL") << ": " << o.detail << std::endl;
  }
  std::cout << criteria.size() - failed << "/" << criteria.size() << " criteria passed"
            << std::endl;
  return failed == 0 ? 0 : 1;
}
