#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "gacg/harness/config.hpp"
#include "gacg/training/rollout.hpp"

namespace gacg::harness {

// Training produced a non-finite loss; the CLI maps it to exit code 3.
class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(std::uint64_t step, const std::string& detail);
  std::uint64_t step() const { return step_; }

 private:
  std::uint64_t step_;
};

struct MetricsRow {
  std::uint64_t step = 0;
  std::uint64_t episode = 0;
  double mean_return = 0.0;
  double capture_rate = 0.0;
  double epsilon = 0.0;
  double loss_total = 0.0;
  double loss_td = 0.0;
  double group_raw = 0.0;
  double group_reg = 0.0;
};

inline constexpr const char* kMetricsHeader =
    "step,episode,mean_return,capture_rate,epsilon,loss_total,loss_td,group_raw,group_reg";

std::string format_metrics_row(const MetricsRow& row);

struct RunOptions {
  // Checkpoint directory to continue from (must hold resume.bin).
  std::optional<std::string> resume_from;
  // Stop after this many env steps even if total_steps is larger; used to
  // produce interrupted runs.
  std::optional<std::uint64_t> stop_after;
};

struct RunResult {
  std::string run_dir;
  std::string metrics_path;
  std::string final_checkpoint;
  std::vector<MetricsRow> rows;  // rows written by this invocation
  std::uint64_t env_steps = 0;
  double wallclock_s = 0.0;
};

// Runs the rollout / replay / update loop with periodic greedy evaluation.
// Writes metrics.csv, timing.csv and effective_config.json into the run
// directory and checkpoints under <run_dir>/checkpoints.
RunResult run_training(const RunConfig& config, const RunOptions& options = {});

// Mean capture rate over the last `count` rows (all rows if fewer).
double final_capture_rate(const std::vector<MetricsRow>& rows, std::size_t count = 5);
std::vector<MetricsRow> read_metrics(const std::string& path);

struct EvalSummary {
  train::EvalResult result;
  bool random_policy = false;
  std::uint64_t checkpoint_step = 0;
  nlohmann::json to_json() const;
};

// Greedy rollouts of the checkpointed policy (or uniform random actions).
EvalSummary evaluate_checkpoint(const std::string& checkpoint_dir, std::size_t episodes,
                                std::uint64_t seed, bool random_policy = false);

}  // namespace gacg::harness
