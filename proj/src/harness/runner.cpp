#include "gacg/harness/runner.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "gacg/harness/checkpoint.hpp"
#include "gacg/harness/logging.hpp"
#include "gacg/numerics/errors.hpp"

namespace gacg::harness {

namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kInitStream = 100;
constexpr std::uint64_t kSampleStream = 10;
constexpr std::uint64_t kEvalStreamBase = 1'000'000;
constexpr std::uint64_t kStandaloneEvalStream = 2'000'000;

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

// Keeps the header and rows whose first column is <= max_step.
void truncate_after(const fs::path& path, std::uint64_t max_step, const std::string& header) {
  std::vector<std::string> kept{header};
  if (fs::exists(path)) {
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      if (std::stoull(split_csv(line).at(0)) <= max_step) kept.push_back(line);
    }
  }
  std::ofstream out(path, std::ios::trunc);
  for (const auto& l : kept) out << l << '\n';
}

nlohmann::json training_fields(const RunConfig& c) {
  auto j = to_json(c);
  j.erase("run_id");
  j.erase("output_dir");
  return j;
}

}  // namespace

TrainingDiverged::TrainingDiverged(std::uint64_t step, const std::string& detail)
    : std::runtime_error("non-finite loss at env step " + std::to_string(step) + ": " + detail),
      step_(step) {}

std::string format_metrics_row(const MetricsRow& r) {
  std::string s = std::to_string(r.step) + "," + std::to_string(r.episode);
  for (double v : {r.mean_return, r.capture_rate, r.epsilon, r.loss_total, r.loss_td,
                   r.group_raw, r.group_reg}) {
    s += "," + fmt_double(v);
  }
  return s;
}

RunResult run_training(const RunConfig& config, const RunOptions& options) {
  const auto spec = config.model_spec();
  const env::PursuitEnv env(config.env);
  const auto& tc = config.train;

  RunResult result;
  result.run_dir = config.run_dir();
  fs::create_directories(result.run_dir);
  const fs::path dir(result.run_dir);
  result.metrics_path = (dir / "metrics.csv").string();
  {
    std::ofstream out(dir / "effective_config.json", std::ios::trunc);
    out << to_json(config).dump(2) << '\n';
  }

  num::RngStream init_rng(config.seed, kInitStream);
  train::Learner learner(spec, tc, init_rng);
  auto streams = train::RolloutStreams::derive(config.seed, 0);
  num::RngStream sample_rng(config.seed, kSampleStream);

  TrainingState st;
  st.buffer = train::ReplayBuffer(tc.buffer_capacity);
  st.next_eval = tc.eval_interval;
  st.next_checkpoint = tc.checkpoint_interval;

  if (options.resume_from) {
    auto ckpt = load_checkpoint(*options.resume_from);
    if (training_fields(ckpt.config) != training_fields(config)) {
      throw ConfigError("resume: checkpoint was trained with a different configuration");
    }
    learner.online().copy_values_from(ckpt.params);
    st = load_training_state(*options.resume_from, learner.online(), tc.buffer_capacity);
    learner.target().copy_values_from(st.target);
    learner.optimizer() = st.adam;
    learner.set_updates(st.updates);
    auto* counters = st.stream_counters;
    streams = {num::RngStream(config.seed, 0, counters[0]),
               num::RngStream(config.seed, 1, counters[1]),
               num::RngStream(config.seed, 2, counters[2]),
               num::RngStream(config.seed, 3, counters[3])};
    sample_rng = num::RngStream(config.seed, kSampleStream, counters[4]);
    spdlog::info("resuming {} from env step {}", result.run_dir, st.env_steps);
  }
  const std::uint64_t resume_step = st.env_steps;
  truncate_after(dir / "metrics.csv", resume_step, kMetricsHeader);
  truncate_after(dir / "timing.csv", resume_step, "step,wallclock_s");
  std::ofstream metrics(dir / "metrics.csv", std::ios::app);
  std::ofstream timing(dir / "timing.csv", std::ios::app);

  auto snapshot = [&](const std::string& name) {
    const auto path = (dir / "checkpoints" / name).string();
    save_checkpoint(learner.online(), config, st.env_steps, path);
    st.target = learner.target().clone();
    st.adam = learner.optimizer();
    st.updates = learner.updates();
    st.stream_counters[0] = streams.env.counter();
    st.stream_counters[1] = streams.actions.counter();
    st.stream_counters[2] = streams.noise.counter();
    st.stream_counters[3] = streams.groups.counter();
    st.stream_counters[4] = sample_rng.counter();
    save_training_state(st, path);
    return path;
  };

  const std::uint64_t limit = std::min<std::uint64_t>(
      tc.total_steps, options.stop_after.value_or(tc.total_steps));
  const auto start = std::chrono::steady_clock::now();
  const double wall_base = st.wallclock;
  while (st.env_steps < limit) {
    // Parameters blown up by an update surface as NumericalError in the next
    // update or the next forward pass, whichever comes first.
    try {
      const double epsilon = tc.epsilon_at(st.env_steps);
      auto episode = train::rollout_episode(env, spec, &learner.online(), epsilon, streams);
      st.env_steps += episode.stats.length;
      ++st.episodes;
      st.buffer.push(std::move(episode.record));

      if (st.buffer.size() >= tc.batch_episodes) {
        for (std::size_t u = 0; u < tc.updates_per_episode; ++u) {
          const auto report = learner.train_step(st.buffer, sample_rng);
          st.loss_total_sum += report.total;
          st.loss_td_sum += report.td;
          st.group_raw_sum += report.group_raw;
          st.group_reg_sum += report.group_reg;
          ++st.loss_count;
        }
      }

      st.wallclock =
          wall_base +
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      if (st.env_steps >= st.next_eval) {
        auto eval_streams =
            train::RolloutStreams::derive(config.seed, kEvalStreamBase + 4 * st.eval_index);
        const auto ev = train::evaluate_policy(env, spec, &learner.online(), tc.eval_episodes,
                                               eval_streams);
        const double k = st.loss_count > 0 ? static_cast<double>(st.loss_count) : 1.0;
        MetricsRow row{st.env_steps,        st.episodes,        ev.mean_return,
                       ev.capture_rate,     epsilon,            st.loss_total_sum / k,
                       st.loss_td_sum / k,  st.group_raw_sum / k, st.group_reg_sum / k};
        metrics << format_metrics_row(row) << '\n' << std::flush;
        timing << st.env_steps << ',' << fmt_double(st.wallclock) << '\n' << std::flush;
        result.rows.push_back(row);
        spdlog::info("step {} episode {}: capture {:.3f} return {:.2f} td {:.4f}", row.step,
                     row.episode, row.capture_rate, row.mean_return, row.loss_td);
        st.loss_total_sum = st.loss_td_sum = st.group_raw_sum = st.group_reg_sum = 0.0;
        st.loss_count = 0;
        ++st.eval_index;
        st.next_eval = (st.env_steps / tc.eval_interval + 1) * tc.eval_interval;
      }
      if (tc.checkpoint_interval > 0 && st.env_steps >= st.next_checkpoint) {
        st.next_checkpoint = (st.env_steps / tc.checkpoint_interval + 1) * tc.checkpoint_interval;
        const auto path = snapshot("step_" + std::to_string(st.env_steps));
        spdlog::debug("checkpoint written to {}", path);
      }
    } catch (const NumericalError& e) {
      throw TrainingDiverged(st.env_steps, e.what());
    }
  }
  result.final_checkpoint = snapshot("final");
  result.env_steps = st.env_steps;
  result.wallclock_s = st.wallclock;
  return result;
}

double final_capture_rate(const std::vector<MetricsRow>& rows, std::size_t count) {
  if (rows.empty()) throw ContractViolation("final_capture_rate: no metric rows");
  const std::size_t n = std::min(count, rows.size());
  double sum = 0.0;
  for (std::size_t i = rows.size() - n; i < rows.size(); ++i) sum += rows[i].capture_rate;
  return sum / static_cast<double>(n);
}

std::vector<MetricsRow> read_metrics(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("metrics: cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || line != kMetricsHeader) {
    throw std::runtime_error("metrics: '" + path + "' has an unexpected header");
  }
  std::vector<MetricsRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto c = split_csv(line);
    if (c.size() != 9) throw std::runtime_error("metrics: malformed row in '" + path + "'");
    rows.push_back({std::stoull(c[0]), std::stoull(c[1]), std::stod(c[2]), std::stod(c[3]),
                    std::stod(c[4]), std::stod(c[5]), std::stod(c[6]), std::stod(c[7]),
                    std::stod(c[8])});
  }
  return rows;
}

nlohmann::json EvalSummary::to_json() const {
  return {{"episodes", result.episodes},
          {"mean_return", result.mean_return},
          {"std_return", result.std_return},
          {"capture_rate", result.capture_rate},
          {"mean_length", result.mean_length},
          {"random_policy", random_policy},
          {"checkpoint_step", checkpoint_step}};
}

EvalSummary evaluate_checkpoint(const std::string& checkpoint_dir, std::size_t episodes,
                                std::uint64_t seed, bool random_policy) {
  if (episodes == 0) throw ParameterError("eval: episodes must be positive");
  const auto ckpt = load_checkpoint(checkpoint_dir);
  const auto spec = ckpt.config.model_spec();
  // Refuse parameters that do not fit the model described by the manifest.
  num::RngStream layout_rng(0, 0);
  const auto expected = policy::init_model_params(spec, layout_rng);
  for (const auto& [name, t] : expected) {
    if (!ckpt.params.contains(name) || ckpt.params.at(name).shape() != t.shape()) {
      throw CheckpointError("checkpoint: parameter '" + name + "' missing or misshapen");
    }
  }
  if (expected.size() != ckpt.params.size()) {
    throw CheckpointError("checkpoint: unexpected extra parameters");
  }
  const env::PursuitEnv env(ckpt.config.env);
  auto streams = train::RolloutStreams::derive(seed, kStandaloneEvalStream);
  EvalSummary s;
  s.random_policy = random_policy;
  s.checkpoint_step = ckpt.step;
  s.result = train::evaluate_policy(env, spec, random_policy ? nullptr : &ckpt.params, episodes,
                                    streams);
  return s;
}

}  // namespace gacg::harness
