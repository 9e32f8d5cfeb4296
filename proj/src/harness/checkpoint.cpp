#include "gacg/harness/checkpoint.hpp"

#include <bit>
#include <filesystem>
#include <fstream>
#include <iterator>

namespace gacg::harness {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

void put_doubles(std::string& out, std::span<const double> values) {
  put_u64(out, values.size());
  for (double v : values) put_f64(out, v);
}

class Reader {
 public:
  Reader(std::string bytes, std::string what) : bytes_(std::move(bytes)), what_(std::move(what)) {}

  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += 8;
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::vector<double> doubles() {
    const auto n = u64();
    need(n * 8);
    std::vector<double> v(n);
    for (auto& x : v) x = f64();
    return v;
  }
  std::string str() {
    const auto n = u64();
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::uint64_t n) const {
    if (n > bytes_.size() - pos_) throw CheckpointError(what_ + ": unexpected end of data");
  }
  std::string bytes_;
  std::string what_;
  std::size_t pos_ = 0;
};

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("checkpoint: cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Writes to a temporary name then renames, so readers never see a torn file.
void write_file(const fs::path& path, const std::string& bytes) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("checkpoint: cannot write '" + tmp.string() + "'");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw CheckpointError("checkpoint: write failed for '" + tmp.string() + "'");
  }
  fs::rename(tmp, path);
}

void put_params(std::string& out, const num::ParameterSet& params) {
  put_u64(out, params.size());
  for (const auto& [name, t] : params) {
    put_u64(out, name.size());
    out += name;
    put_doubles(out, t.values());
  }
}

void read_params_into(Reader& r, num::ParameterSet& params) {
  const auto count = r.u64();
  if (count != params.size()) throw CheckpointError("resume state: parameter count mismatch");
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto name = r.str();
    if (!params.contains(name)) throw CheckpointError("resume state: unknown parameter " + name);
    auto values = r.doubles();
    auto dst = params.at(name).mutable_values();
    if (values.size() != dst.size()) throw CheckpointError("resume state: size mismatch " + name);
    std::ranges::copy(values, dst.begin());
  }
}

void put_map(std::string& out, const std::map<std::string, std::vector<double>>& m) {
  put_u64(out, m.size());
  for (const auto& [name, v] : m) {
    put_u64(out, name.size());
    out += name;
    put_doubles(out, v);
  }
}

std::map<std::string, std::vector<double>> read_map(Reader& r) {
  std::map<std::string, std::vector<double>> m;
  const auto n = r.u64();
  for (std::uint64_t i = 0; i < n; ++i) {
    auto name = r.str();
    m[name] = r.doubles();
  }
  return m;
}

void put_episode(std::string& out, const train::EpisodeRecord& ep) {
  put_u64(out, ep.n_agents);
  put_u64(out, ep.obs_size);
  put_u64(out, ep.window_length);
  put_u64(out, ep.steps.size());
  for (const auto& s : ep.steps) {
    put_doubles(out, s.observations);
    put_doubles(out, s.state);
    put_u64(out, s.labels.size());
    for (auto l : s.labels) put_u64(out, l);
    put_u64(out, s.groups);
    put_doubles(out, s.noise);
    put_u64(out, s.actions.size());
    for (int a : s.actions) put_u64(out, static_cast<std::uint64_t>(a));
    put_f64(out, s.reward);
    put_u64(out, s.done ? 1 : 0);
  }
}

train::EpisodeRecord read_episode(Reader& r) {
  train::EpisodeRecord ep;
  ep.n_agents = r.u64();
  ep.obs_size = r.u64();
  ep.window_length = r.u64();
  ep.steps.resize(r.u64());
  for (auto& s : ep.steps) {
    s.observations = r.doubles();
    s.state = r.doubles();
    s.labels.resize(r.u64());
    for (auto& l : s.labels) l = r.u64();
    s.groups = r.u64();
    s.noise = r.doubles();
    s.actions.resize(r.u64());
    for (auto& a : s.actions) a = static_cast<int>(r.u64());
    s.reward = r.f64();
    s.done = r.u64() != 0;
  }
  return ep;
}

constexpr std::uint64_t kResumeMagic = 0x31534552'47434147ULL;  // "GACGRES1"

}  // namespace

void save_checkpoint(const num::ParameterSet& params, const RunConfig& config,
                     std::uint64_t step, const std::string& dir) {
  fs::create_directories(dir);
  std::string blob;
  blob.reserve(params.total_count() * 8);
  json table = json::array();
  std::uint64_t offset = 0;
  for (const auto& [name, t] : params) {
    table.push_back({{"name", name}, {"shape", t.shape()}, {"offset", offset}});
    for (double v : t.values()) put_f64(blob, v);
    offset += t.numel();
  }
  json manifest = {{"format_version", kCheckpointFormatVersion},
                   {"config_hash", hash_hex(config_hash(config))},
                   {"step", step},
                   {"total_count", offset},
                   {"config", to_json(config)},
                   {"parameters", table}};
  write_file(fs::path(dir) / "params.bin", blob);
  write_file(fs::path(dir) / "manifest.json", manifest.dump(2) + "\n");
}

LoadedCheckpoint load_checkpoint(const std::string& dir) {
  const std::string text = read_file(fs::path(dir) / "manifest.json");
  json manifest;
  try {
    manifest = json::parse(text);
  } catch (const json::parse_error& e) {
    throw CheckpointError("checkpoint: manifest is not valid JSON: " + std::string(e.what()));
  }

  LoadedCheckpoint out;
  std::vector<std::tuple<std::string, num::Shape, std::uint64_t>> entries;
  std::uint64_t total = 0;
  try {
    const int version = manifest.at("format_version").get<int>();
    if (version != kCheckpointFormatVersion) {
      throw CheckpointError("checkpoint: format_version " + std::to_string(version) +
                            " is not supported (expected " +
                            std::to_string(kCheckpointFormatVersion) + ")");
    }
    try {
      out.config = from_json(manifest.at("config"));
    } catch (const ConfigError& e) {
      throw CheckpointError(std::string("checkpoint: embedded config rejected: ") + e.what());
    }
    const auto stored = manifest.at("config_hash").get<std::string>();
    if (stored != hash_hex(config_hash(out.config))) {
      throw CheckpointError("checkpoint: config hash mismatch (manifest " + stored +
                            ", config " + hash_hex(config_hash(out.config)) + ")");
    }
    out.step = manifest.at("step").get<std::uint64_t>();
    total = manifest.at("total_count").get<std::uint64_t>();
    for (const auto& e : manifest.at("parameters")) {
      entries.emplace_back(e.at("name").get<std::string>(), e.at("shape").get<num::Shape>(),
                           e.at("offset").get<std::uint64_t>());
    }
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("checkpoint: malformed manifest: ") + e.what());
  }

  const std::string blob = read_file(fs::path(dir) / "params.bin");
  if (blob.size() != total * 8) {
    throw CheckpointError("checkpoint: params.bin holds " + std::to_string(blob.size()) +
                          " bytes, manifest expects " + std::to_string(total * 8));
  }
  Reader reader(blob, "checkpoint");
  num::ParameterSet params;
  std::uint64_t expected_offset = 0;
  for (const auto& [name, shape, offset] : entries) {
    const auto numel = num::shape_numel(shape);
    if (offset != expected_offset || offset + numel > total) {
      throw CheckpointError("checkpoint: offset table entry for '" + name +
                            "' overruns the parameter blob");
    }
    std::vector<double> values(numel);
    for (auto& v : values) v = reader.f64();
    params.add(name, num::Tensor(shape, std::move(values)));
    expected_offset += numel;
  }
  if (expected_offset != total) {
    throw CheckpointError("checkpoint: offset table does not cover the parameter blob");
  }
  out.params = std::move(params);
  return out;
}

void save_training_state(const TrainingState& s, const std::string& dir) {
  fs::create_directories(dir);
  std::string out;
  put_u64(out, kResumeMagic);
  put_params(out, s.target);
  put_map(out, s.adam.m);
  put_map(out, s.adam.v);
  put_u64(out, s.adam.t);
  for (auto v : {s.updates, s.env_steps, s.episodes, s.next_eval, s.eval_index,
                 s.next_checkpoint, s.loss_count}) {
    put_u64(out, v);
  }
  for (double v : {s.loss_total_sum, s.loss_td_sum, s.group_raw_sum, s.group_reg_sum,
                   s.wallclock}) {
    put_f64(out, v);
  }
  for (auto c : s.stream_counters) put_u64(out, c);
  put_u64(out, s.buffer.size());
  for (std::size_t i = 0; i < s.buffer.size(); ++i) put_episode(out, s.buffer.at(i));
  write_file(fs::path(dir) / "resume.bin", out);
}

TrainingState load_training_state(const std::string& dir, const num::ParameterSet& like,
                                  std::size_t buffer_capacity) {
  Reader r(read_file(fs::path(dir) / "resume.bin"), "resume state");
  if (r.u64() != kResumeMagic) throw CheckpointError("resume state: bad magic");
  TrainingState s;
  s.target = like.clone();
  read_params_into(r, s.target);
  s.adam.m = read_map(r);
  s.adam.v = read_map(r);
  s.adam.t = r.u64();
  for (auto* v : {&s.updates, &s.env_steps, &s.episodes, &s.next_eval, &s.eval_index,
                  &s.next_checkpoint, &s.loss_count}) {
    *v = r.u64();
  }
  for (auto* v : {&s.loss_total_sum, &s.loss_td_sum, &s.group_raw_sum, &s.group_reg_sum,
                  &s.wallclock}) {
    *v = r.f64();
  }
  for (auto& c : s.stream_counters) c = r.u64();
  s.buffer = train::ReplayBuffer(buffer_capacity);
  const auto n = r.u64();
  for (std::uint64_t i = 0; i < n; ++i) s.buffer.push(read_episode(r));
  if (!r.done()) throw CheckpointError("resume state: trailing bytes");
  return s;
}

}  // namespace gacg::harness
