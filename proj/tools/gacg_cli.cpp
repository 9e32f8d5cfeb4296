#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gacg/harness/ablation.hpp"
#include "gacg/harness/checkpoint.hpp"
#include "gacg/harness/config.hpp"
#include "gacg/harness/logging.hpp"
#include "gacg/harness/plot.hpp"
#include "gacg/harness/runner.hpp"
#include "gacg/numerics/errors.hpp"

namespace {

using namespace gacg;
using namespace gacg::harness;

constexpr int kExitError = 1;
constexpr int kExitConfig = 2;
constexpr int kExitDiverged = 3;

// One line on stderr: "error: <kind>: <message>".
int fail(int code, const char* kind, const std::string& message) {
  std::string flat = message;
  for (char& ch : flat) {
    if (ch == '\n' || ch == '\r') ch = ' ';
  }
  std::fprintf(stderr, "error: %s: %s\n", kind, flat.c_str());
  return code;
}

RunConfig config_with_overrides(const std::string& path, const std::vector<std::string>& sets) {
  nlohmann::json doc = nlohmann::json::object();
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open '" + path + "'");
    try {
      doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError("config: '" + path + "' is not valid JSON: " + e.what());
    }
  }
  for (const auto& s : sets) apply_override(doc, s);
  return from_json(doc);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Group-aware coordination graph training for cooperative pursuit"};
  app.require_subcommand(1);

  std::string config_path, resume;
  std::vector<std::string> sets;
  auto* train_cmd = app.add_subcommand("train", "train one run and write metrics + checkpoints");
  train_cmd->add_option("--config", config_path, "JSON config file (defaults when omitted)");
  train_cmd->add_option("--set", sets, "override, e.g. --set train.lambda=0.2");
  train_cmd->add_option("--resume", resume, "checkpoint directory to continue from");

  std::string checkpoint;
  std::size_t episodes = 20;
  std::uint64_t eval_seed = 0;
  bool random_policy = false;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint greedily");
  eval_cmd->add_option("--checkpoint", checkpoint, "checkpoint directory")->required();
  eval_cmd->add_option("--episodes", episodes, "number of episodes");
  eval_cmd->add_option("--seed", eval_seed, "evaluation seed");
  eval_cmd->add_flag("--random-policy", random_policy, "act uniformly at random instead");

  std::string axis, seeds = "0..4";
  auto* ablate_cmd = app.add_subcommand("ablate", "run an ablation suite");
  ablate_cmd->add_option("--axis", axis,
                         "distribution | group_loss | group_count | window_length")
      ->required();
  ablate_cmd->add_option("--seeds", seeds, "seed range a..b or list a,b,c");
  ablate_cmd->add_option("--config", config_path, "base JSON config");
  ablate_cmd->add_option("--set", sets, "override applied to the base config");

  std::string out_svg;
  std::vector<std::string> csvs;
  auto* plot_cmd = app.add_subcommand("plot", "render metrics CSVs to an SVG chart");
  plot_cmd->add_option("--out", out_svg, "output SVG path")->required();
  plot_cmd->add_option("csv", csvs, "metrics.csv files")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail(kExitConfig, "usage", e.what());
  }

  init_logging();
  try {
    if (*train_cmd) {
      const auto config = config_with_overrides(config_path, sets);
      RunOptions options;
      if (!resume.empty()) options.resume_from = resume;
      const auto run = run_training(config, options);
      std::cout << nlohmann::json{{"run_dir", run.run_dir},
                                  {"metrics", run.metrics_path},
                                  {"checkpoint", run.final_checkpoint},
                                  {"env_steps", run.env_steps},
                                  {"final_capture_rate", final_capture_rate(run.rows)}}
                       .dump()
                << '\n';
    } else if (*eval_cmd) {
      const auto summary = evaluate_checkpoint(checkpoint, episodes, eval_seed, random_policy);
      std::cout << summary.to_json().dump(2) << '\n';
    } else if (*ablate_cmd) {
      const auto base = config_with_overrides(config_path, sets);
      const auto result = run_ablation_suite(base, parse_axis(axis), parse_seed_list(seeds));
      std::cout << result.comparison_path << '\n';
    } else if (*plot_cmd) {
      emit_plots(csvs, out_svg);
      std::cout << out_svg << '\n';
    }
  } catch (const ConfigError& e) {
    return fail(kExitConfig, "config", e.what());
  } catch (const TrainingDiverged& e) {
    return fail(kExitDiverged, "diverged", e.what());
  } catch (const CheckpointError& e) {
    return fail(kExitError, "checkpoint", e.what());
  } catch (const ParameterError& e) {
    return fail(kExitError, "parameter", e.what());
  } catch (const PlotError& e) {
    return fail(kExitError, "plot", e.what());
  } catch (const std::exception& e) {
    return fail(kExitError, "internal", e.what());
  }
  return 0;
}
