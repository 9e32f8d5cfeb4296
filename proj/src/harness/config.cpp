#include "gacg/harness/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace gacg::harness {

using nlohmann::json;

std::string RunConfig::run_dir() const {
  return output_dir + "/" + run_id + "/seed" + std::to_string(seed);
}

policy::ModelSpec RunConfig::model_spec() const {
  policy::ModelSpec spec;
  spec.n_agents = static_cast<std::size_t>(env.n_agents);
  spec.obs_size = env.observation_size();
  spec.state_size = env.state_size();
  spec.n_actions = env::kNumActions;
  spec.window_length = group.k;
  spec.groups = group.m;
  spec.encoder = {model.hidden, model.d_h, model.d_k};
  spec.graph = graph;
  spec.policy = {model.gnn_layers, model.agent_hidden, model.mixer_embed};
  return spec;
}

json to_json(const RunConfig& c) {
  json j;
  j["env"] = {{"grid_size", c.env.grid_size},         {"n_agents", c.env.n_agents},
              {"n_scouts", c.env.n_scouts},           {"n_prey", c.env.n_prey},
              {"scout_radius", c.env.scout_radius},   {"captor_radius", c.env.captor_radius},
              {"episode_limit", c.env.episode_limit}, {"step_penalty", c.env.step_penalty},
              {"capture_reward", c.env.capture_reward}};
  j["model"] = {{"hidden", c.model.hidden},         {"d_h", c.model.d_h},
                {"d_k", c.model.d_k},               {"gnn_layers", c.model.gnn_layers},
                {"agent_hidden", c.model.agent_hidden}, {"mixer_embed", c.model.mixer_embed}};
  j["graph"] = {{"mode", graph::to_string(c.graph.mode)},
                {"sigma2", c.graph.sigma2},
                {"covariance", graph::to_string(c.graph.covariance)}};
  j["group"] = {{"m", c.group.m}, {"k", c.group.k}};
  const auto& t = c.train;
  j["train"] = {{"lambda", t.lambda},
                {"gamma", t.gamma},
                {"lr", t.lr},
                {"grad_clip", t.grad_clip},
                {"batch_episodes", t.batch_episodes},
                {"buffer_capacity", t.buffer_capacity},
                {"target_period", t.target_period},
                {"total_steps", t.total_steps},
                {"updates_per_episode", t.updates_per_episode},
                {"epsilon_start", t.epsilon_start},
                {"epsilon_end", t.epsilon_end},
                {"epsilon_anneal_steps", t.epsilon_anneal_steps},
                {"group_loss_scope", train::to_string(t.group_loss_scope)},
                {"eval_interval", t.eval_interval},
                {"eval_episodes", t.eval_episodes},
                {"checkpoint_interval", t.checkpoint_interval}};
  j["seed"] = c.seed;
  j["run_id"] = c.run_id;
  j["output_dir"] = c.output_dir;
  return j;
}

namespace {

// Overlays `user` onto `base` key by key, rejecting unknown keys and type
// changes. Integers are accepted where a float is expected.
void merge_strict(json& base, const json& user, const std::string& prefix) {
  if (!user.is_object()) throw ConfigError("config: '" + prefix + "' must be an object");
  for (const auto& [key, value] : user.items()) {
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    if (!base.contains(key)) throw ConfigError("unknown config key '" + path + "'");
    auto& slot = base[key];
    if (slot.is_object()) {
      merge_strict(slot, value, path);
      continue;
    }
    const bool ok = (slot.is_string() && value.is_string()) ||
                    (slot.is_number_float() && value.is_number()) ||
                    (slot.is_number_unsigned() && value.is_number_unsigned()) ||
                    (slot.is_number_integer() && !slot.is_number_unsigned() &&
                     value.is_number_integer());
    if (!ok) {
      throw ConfigError("config key '" + path + "' expects a " + slot.type_name() + ", got " +
                        value.dump());
    }
    slot = value;
  }
}

template <typename T>
T get(const json& j, const char* section, const char* key) {
  return j.at(section).at(key).get<T>();
}

}  // namespace

RunConfig from_json(const json& doc) {
  json merged = to_json(RunConfig{});
  merge_strict(merged, doc, "");

  RunConfig c;
  try {
    c.env.grid_size = get<int>(merged, "env", "grid_size");
    c.env.n_agents = get<int>(merged, "env", "n_agents");
    c.env.n_scouts = get<int>(merged, "env", "n_scouts");
    c.env.n_prey = get<int>(merged, "env", "n_prey");
    c.env.scout_radius = get<int>(merged, "env", "scout_radius");
    c.env.captor_radius = get<int>(merged, "env", "captor_radius");
    c.env.episode_limit = get<int>(merged, "env", "episode_limit");
    c.env.step_penalty = get<double>(merged, "env", "step_penalty");
    c.env.capture_reward = get<double>(merged, "env", "capture_reward");

    c.model.hidden = get<std::size_t>(merged, "model", "hidden");
    c.model.d_h = get<std::size_t>(merged, "model", "d_h");
    c.model.d_k = get<std::size_t>(merged, "model", "d_k");
    c.model.gnn_layers = get<std::size_t>(merged, "model", "gnn_layers");
    c.model.agent_hidden = get<std::size_t>(merged, "model", "agent_hidden");
    c.model.mixer_embed = get<std::size_t>(merged, "model", "mixer_embed");

    c.graph.mode = graph::parse_edge_mode(get<std::string>(merged, "graph", "mode"));
    c.graph.sigma2 = get<double>(merged, "graph", "sigma2");
    c.graph.covariance = graph::parse_covariance(get<std::string>(merged, "graph", "covariance"));

    c.group.m = get<std::size_t>(merged, "group", "m");
    c.group.k = get<std::size_t>(merged, "group", "k");

    auto& t = c.train;
    t.lambda = get<double>(merged, "train", "lambda");
    t.gamma = get<double>(merged, "train", "gamma");
    t.lr = get<double>(merged, "train", "lr");
    t.grad_clip = get<double>(merged, "train", "grad_clip");
    t.batch_episodes = get<std::size_t>(merged, "train", "batch_episodes");
    t.buffer_capacity = get<std::size_t>(merged, "train", "buffer_capacity");
    t.target_period = get<std::size_t>(merged, "train", "target_period");
    t.total_steps = get<std::size_t>(merged, "train", "total_steps");
    t.updates_per_episode = get<std::size_t>(merged, "train", "updates_per_episode");
    t.epsilon_start = get<double>(merged, "train", "epsilon_start");
    t.epsilon_end = get<double>(merged, "train", "epsilon_end");
    t.epsilon_anneal_steps = get<std::size_t>(merged, "train", "epsilon_anneal_steps");
    t.group_loss_scope =
        train::parse_group_loss_scope(get<std::string>(merged, "train", "group_loss_scope"));
    t.eval_interval = get<std::size_t>(merged, "train", "eval_interval");
    t.eval_episodes = get<std::size_t>(merged, "train", "eval_episodes");
    t.checkpoint_interval = get<std::size_t>(merged, "train", "checkpoint_interval");

    c.seed = merged.at("seed").get<std::uint64_t>();
    c.run_id = merged.at("run_id").get<std::string>();
    c.output_dir = merged.at("output_dir").get<std::string>();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  finalize(c);
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config: '" + path + "' is not valid JSON: " + e.what());
  }
  return from_json(doc);
}

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override '" + assignment + "' is not of the form key=value");
  }
  const std::string path = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::parse_error&) {
    value = text;
  }
  json* node = &doc;
  std::size_t start = 0;
  for (;;) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot - start);
    if (key.empty()) throw ConfigError("override key '" + path + "' is malformed");
    if (dot == std::string::npos) {
      (*node)[key] = value;
      return;
    }
    auto& child = (*node)[key];
    if (child.is_null()) child = json::object();
    if (!child.is_object()) throw ConfigError("override key '" + path + "' is malformed");
    node = &child;
    start = dot + 1;
  }
}

void finalize(RunConfig& c) {
  try {
    c.env.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError("config: " + what);
  };
  const auto n = static_cast<std::size_t>(c.env.n_agents);
  require(c.group.m <= n, "group.m must not exceed env.n_agents");
  require(c.group.k >= 1, "group.k must be >= 1");
  require(c.model.hidden > 0 && c.model.d_h > 0 && c.model.d_k > 0, "model widths must be > 0");
  require(c.model.gnn_layers >= 1, "model.gnn_layers must be >= 1");
  require(c.model.agent_hidden > 0 && c.model.mixer_embed > 0, "model widths must be > 0");
  require(c.graph.sigma2 >= 0.0, "graph.sigma2 must be >= 0");
  const auto& t = c.train;
  require(t.lambda >= 0.0, "train.lambda must be >= 0");
  require(t.gamma >= 0.0 && t.gamma < 1.0, "train.gamma must be in [0, 1)");
  require(t.lr > 0.0, "train.lr must be > 0");
  require(t.batch_episodes >= 1, "train.batch_episodes must be >= 1");
  require(t.buffer_capacity >= t.batch_episodes,
          "train.buffer_capacity must hold at least one batch");
  require(t.total_steps >= 1, "train.total_steps must be >= 1");
  require(t.epsilon_start >= 0.0 && t.epsilon_start <= 1.0, "train.epsilon_start not in [0,1]");
  require(t.epsilon_end >= 0.0 && t.epsilon_end <= 1.0, "train.epsilon_end not in [0,1]");
  require(t.eval_interval >= 1, "train.eval_interval must be >= 1");
  require(t.eval_episodes >= 1, "train.eval_episodes must be >= 1");
  require(!c.run_id.empty() && c.run_id.find('/') == std::string::npos,
          "run_id must be a non-empty name without '/'");
  if (c.group.m == 0) c.train.lambda = 0.0;
}

std::uint64_t config_hash(const RunConfig& config) {
  const std::string text = to_json(config).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hash_hex(std::uint64_t hash) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

}  // namespace gacg::harness
