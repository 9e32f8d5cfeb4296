#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gacg/harness/config.hpp"

namespace gacg::harness {

enum class AblationAxis { kDistribution, kGroupLoss, kGroupCount, kWindowLength };

std::string to_string(AblationAxis axis);
AblationAxis parse_axis(const std::string& name);

struct Variant {
  std::string name;
  RunConfig config;  // seed not yet applied
};

// Variant configurations for one axis, derived from `base`:
//   distribution   gacg, attention, bernoulli, inde_gaussian, gacg_no_lg
//   group_loss     lg_all, lg_policy_only, no_lg
//   group_count    m0, m2, m4, m8 (m above the agent count is clamped)
//   window_length  k1, k5, k10, k20
std::vector<Variant> ablation_variants(const RunConfig& base, AblationAxis axis);

struct AblationEntry {
  std::string variant;
  std::uint64_t seed = 0;
  double final_capture_rate = 0.0;
  std::string metrics_path;
};

struct AblationResult {
  std::string suite_dir;
  std::string comparison_path;
  std::vector<AblationEntry> entries;
};

// Runs every variant for every seed under <output_dir>/ablation_<axis>/ and
// writes comparison.csv (variant, seed, final_capture_rate).
AblationResult run_ablation_suite(const RunConfig& base, AblationAxis axis,
                                  const std::vector<std::uint64_t>& seeds);

// "0..4" or "0,2,7".
std::vector<std::uint64_t> parse_seed_list(const std::string& text);

}  // namespace gacg::harness
