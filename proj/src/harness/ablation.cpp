#include "gacg/harness/ablation.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "gacg/harness/logging.hpp"
#include "gacg/harness/runner.hpp"

namespace gacg::harness {

std::string to_string(AblationAxis axis) {
  switch (axis) {
    case AblationAxis::kDistribution: return "distribution";
    case AblationAxis::kGroupLoss: return "group_loss";
    case AblationAxis::kGroupCount: return "group_count";
    case AblationAxis::kWindowLength: return "window_length";
  }
  return "?";
}

AblationAxis parse_axis(const std::string& name) {
  for (auto a : {AblationAxis::kDistribution, AblationAxis::kGroupLoss, AblationAxis::kGroupCount,
                 AblationAxis::kWindowLength}) {
    if (to_string(a) == name) return a;
  }
  throw ConfigError("unknown ablation axis '" + name +
                    "' (expected distribution, group_loss, group_count or window_length)");
}

std::vector<Variant> ablation_variants(const RunConfig& base, AblationAxis axis) {
  std::vector<Variant> out;
  auto add = [&](std::string name, auto&& edit) {
    RunConfig c = base;
    edit(c);
    finalize(c);
    out.push_back({std::move(name), std::move(c)});
  };
  using graph::EdgeMode;
  switch (axis) {
    case AblationAxis::kDistribution:
      add("gacg", [](RunConfig& c) { c.graph.mode = EdgeMode::kGacg; });
      add("attention", [](RunConfig& c) { c.graph.mode = EdgeMode::kAttention; });
      add("bernoulli", [](RunConfig& c) { c.graph.mode = EdgeMode::kBernoulli; });
      add("inde_gaussian", [](RunConfig& c) { c.graph.mode = EdgeMode::kIndeGaussian; });
      add("gacg_no_lg", [](RunConfig& c) {
        c.graph.mode = EdgeMode::kGacg;
        c.train.lambda = 0.0;
      });
      break;
    case AblationAxis::kGroupLoss:
      add("lg_all", [](RunConfig& c) { c.train.group_loss_scope = train::GroupLossScope::kAll; });
      add("lg_policy_only",
          [](RunConfig& c) { c.train.group_loss_scope = train::GroupLossScope::kPolicyOnly; });
      add("no_lg", [](RunConfig& c) { c.train.lambda = 0.0; });
      break;
    case AblationAxis::kGroupCount:
      for (std::size_t m : {0, 2, 4, 8}) {
        add("m" + std::to_string(m), [m](RunConfig& c) {
          const auto n = static_cast<std::size_t>(c.env.n_agents);
          if (m > n) spdlog::warn("group count {} exceeds {} agents, clamping", m, n);
          c.group.m = std::min(m, n);
        });
      }
      break;
    case AblationAxis::kWindowLength:
      for (std::size_t k : {1, 5, 10, 20}) {
        add("k" + std::to_string(k), [k](RunConfig& c) { c.group.k = k; });
      }
      break;
  }
  return out;
}

AblationResult run_ablation_suite(const RunConfig& base, AblationAxis axis,
                                  const std::vector<std::uint64_t>& seeds) {
  if (seeds.empty()) throw ConfigError("ablation: no seeds given");
  AblationResult result;
  result.suite_dir = base.output_dir + "/ablation_" + to_string(axis);
  std::filesystem::create_directories(result.suite_dir);
  result.comparison_path = result.suite_dir + "/comparison.csv";

  for (const auto& variant : ablation_variants(base, axis)) {
    for (auto seed : seeds) {
      RunConfig c = variant.config;
      c.seed = seed;
      c.output_dir = result.suite_dir;
      c.run_id = variant.name;
      spdlog::info("ablation {}: variant {} seed {}", to_string(axis), variant.name, seed);
      const auto run = run_training(c);
      result.entries.push_back(
          {variant.name, seed, final_capture_rate(run.rows), run.metrics_path});
    }
  }

  std::ofstream out(result.comparison_path, std::ios::trunc);
  out << "variant,seed,final_capture_rate\n";
  char buf[64];
  for (const auto& e : result.entries) {
    std::snprintf(buf, sizeof buf, "%.12g", e.final_capture_rate);
    out << e.variant << ',' << e.seed << ',' << buf << '\n';
  }
  return result;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  auto number = [&](const std::string& s) -> std::uint64_t {
    if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) {
      throw ConfigError("seed list '" + text + "' is malformed");
    }
    return std::stoull(s);
  };
  const auto range = text.find("..");
  if (range != std::string::npos) {
    const auto lo = number(text.substr(0, range)), hi = number(text.substr(range + 2));
    if (hi < lo) throw ConfigError("seed range '" + text + "' is empty");
    for (auto s = lo; s <= hi; ++s) seeds.push_back(s);
    return seeds;
  }
  std::size_t start = 0;
  for (;;) {
    const auto comma = text.find(',', start);
    seeds.push_back(number(text.substr(start, comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return seeds;
}

}  // namespace gacg::harness
