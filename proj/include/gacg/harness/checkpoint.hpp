#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include "gacg/harness/config.hpp"
#include "gacg/numerics/parameter_set.hpp"
#include "gacg/numerics/rng.hpp"
#include "gacg/training/episode.hpp"
#include "gacg/training/optimizer.hpp"

namespace gacg::harness {

inline constexpr int kCheckpointFormatVersion = 1;

// Unreadable, inconsistent or incompatible checkpoint data.
class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct LoadedCheckpoint {
  num::ParameterSet params;
  RunConfig config;
  std::uint64_t step = 0;
};

// Writes <dir>/manifest.json and <dir>/params.bin (little-endian f64 values
// in manifest order). Creates the directory if needed.
void save_checkpoint(const num::ParameterSet& params, const RunConfig& config,
                     std::uint64_t step, const std::string& dir);

// Validates everything before returning: manifest syntax, format version,
// config hash and blob size against the offset table.
LoadedCheckpoint load_checkpoint(const std::string& dir);

// Everything beyond the online parameters that a bit-exact resume needs.
struct TrainingState {
  num::ParameterSet target;
  train::AdamState adam;
  std::uint64_t updates = 0;
  std::uint64_t env_steps = 0;
  std::uint64_t episodes = 0;
  std::uint64_t next_eval = 0;
  std::uint64_t eval_index = 0;
  std::uint64_t next_checkpoint = 0;
  // Loss accumulators for the current evaluation interval.
  double loss_total_sum = 0.0, loss_td_sum = 0.0, group_raw_sum = 0.0, group_reg_sum = 0.0;
  std::uint64_t loss_count = 0;
  double wallclock = 0.0;
  // Counters of the rollout (env, actions, noise, groups) and sampling streams.
  std::uint64_t stream_counters[5] = {0, 0, 0, 0, 0};
  train::ReplayBuffer buffer{1};
};

// <dir>/resume.bin; read back against the parameter layout of `like`.
void save_training_state(const TrainingState& state, const std::string& dir);
TrainingState load_training_state(const std::string& dir, const num::ParameterSet& like,
                                  std::size_t buffer_capacity);

}  // namespace gacg::harness
