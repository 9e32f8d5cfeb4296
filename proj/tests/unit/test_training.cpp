#include <doctest.h>

#include <cmath>
#include <cstring>
#include <map>

#include "gacg/numerics/errors.hpp"
#include "gacg/numerics/grad_check.hpp"
#include "gacg/numerics/ops.hpp"
#include "gacg/training/losses.hpp"
#include "gacg/training/optimizer.hpp"
#include "gacg/training/trainer.hpp"
#include "support/fixtures.hpp"

using namespace gacg;
using namespace gacg::train;
using num::Tensor;

namespace {

double dist(const std::vector<double>& a, const std::vector<double>& b) {
  double ss = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) ss += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(ss);
}

// Straight transcription of the ratio: cross-group mean distances summed over
// ordered group pairs / (m-1)^2, over within-group means (self pairs
// included) summed over groups / m.
double ratio_oracle(const std::vector<std::vector<double>>& pi,
                    const std::vector<std::size_t>& labels, std::size_t m) {
  if (m < 2) return 0.0;
  std::vector<std::vector<std::size_t>> groups(m);
  for (std::size_t i = 0; i < labels.size(); ++i) groups[labels[i]].push_back(i);
  double num = 0.0, den = 0.0;
  for (std::size_t g = 0; g < m; ++g) {
    for (std::size_t h = 0; h < m; ++h) {
      if (g == h) continue;
      double s = 0.0;
      for (auto a : groups[g]) {
        for (auto b : groups[h]) s += dist(pi[a], pi[b]);
      }
      num += s / double(groups[g].size() * groups[h].size());
    }
    double s = 0.0;
    for (auto a : groups[g]) {
      for (auto b : groups[g]) s += dist(pi[a], pi[b]);
    }
    den += s / double(groups[g].size() * groups[g].size());
  }
  num /= double((m - 1) * (m - 1));
  den /= double(m);
  return num / std::max(den, 1e-8);
}

Tensor rows_to_tensor(const std::vector<std::vector<double>>& rows) {
  std::vector<double> flat;
  for (const auto& r : rows) flat.insert(flat.end(), r.begin(), r.end());
  return Tensor({rows.size(), rows[0].size()}, flat);
}

const std::vector<std::vector<double>> kHandPi = {{1, 0}, {0.8, 0.2}, {0, 1}, {0.2, 0.8}};
const graph::GroupPartition kHandGroups{{0, 0, 1, 1}, 2, 1};

}  // namespace

TEST_CASE("group distance ratio on the two-by-two hand example") {
  const auto pi = rows_to_tensor(kHandPi);
  CHECK(std::abs(group_distance_loss(pi, kHandGroups) - 16.0) <= 1e-9);
  CHECK(std::abs(group_regularizer(pi, kHandGroups).item() - 0.0625) <= 1e-9);
  CHECK(std::abs(ratio_oracle(kHandPi, kHandGroups.labels, 2) - 16.0) <= 1e-9);
}

TEST_CASE("degenerate group configurations give zero") {
  std::vector<std::vector<double>> same(4, {0.3, 0.7});
  const auto pi = rows_to_tensor(same);
  CHECK(group_distance_loss(pi, kHandGroups) == 0.0);
  CHECK(group_regularizer(pi, kHandGroups).item() == 0.0);

  const graph::GroupPartition one{{0, 0, 0, 0}, 1, 1};
  const auto hand = rows_to_tensor(kHandPi);
  CHECK(group_distance_loss(hand, one) == 0.0);
  CHECK(group_regularizer(hand, one).item() == 0.0);

  // Identical within groups, distinct across: nothing left to pull together.
  const auto split = rows_to_tensor({{1, 0}, {1, 0}, {0, 1}, {0, 1}});
  CHECK(group_regularizer(split, kHandGroups).item() == 0.0);
}

TEST_CASE("ratio matches the oracle and its trained form is the reciprocal") {
  num::RngStream rng(20, 0);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng.uniform_int(6), m = 2 + rng.uniform_int(n - 1);
    std::vector<std::size_t> labels(n);
    for (std::size_t i = 0; i < n; ++i) labels[i] = i < m ? i : rng.uniform_int(m);
    std::vector<std::vector<double>> pi(n, std::vector<double>(5));
    for (auto& row : pi) {
      double s = 0.0;
      for (auto& x : row) s += (x = rng.uniform() + 1e-3);
      for (auto& x : row) x /= s;
    }
    const graph::GroupPartition part{labels, m, 1};
    const auto t = rows_to_tensor(pi);
    const double raw = group_distance_loss(t, part);
    CHECK(raw == doctest::Approx(ratio_oracle(pi, labels, m)).epsilon(1e-12));
    // All-singleton partitions have no within-group term to invert.
    if (m < n) CHECK(std::abs(raw * group_regularizer(t, part).item() - 1.0) <= 1e-9);
  }
}

TEST_CASE("regulariser gradient check with respect to policies") {
  num::RngStream rng(21, 0);
  for (int trial = 0; trial < 10; ++trial) {
    num::ParameterSet p;
    p.add("pi", testing::random_tensor({5, 4}, rng, 0.05, 1.0));
    const graph::GroupPartition part{{0, 1, 0, 2, 1}, 3, 1};
    auto f = [&](const num::ParameterSet& ps) { return group_regularizer(ps.at("pi"), part); };
    CHECK(num::grad_check(f, p, 1e-6).max_relative_error <= 1e-5);
  }
}

TEST_CASE("group terms average over timesteps and skip ungrouped ones") {
  const auto hand = rows_to_tensor(kHandPi);
  std::vector<std::vector<double>> doubled = kHandPi;
  doubled.insert(doubled.end(), kHandPi.begin(), kHandPi.end());
  const auto two = rows_to_tensor(doubled);
  const graph::GroupPartition* both[] = {&kHandGroups, &kHandGroups};
  const auto terms = group_terms(two, 4, both);
  CHECK(terms.raw == doctest::Approx(16.0));
  CHECK(terms.regularizer.item() == doctest::Approx(0.0625));

  const graph::GroupPartition* none[] = {nullptr, nullptr};
  const auto off = group_terms(two, 4, none);
  CHECK(off.raw == 0.0);
  CHECK(off.regularizer.item() == 0.0);
  CHECK_THROWS_AS(group_terms(hand, 4, both), DimensionError);
}

TEST_CASE("total loss arithmetic") {
  CHECK(total_loss(1.0, 0.5, 0.1).total == doctest::Approx(1.05));
  CHECK(total_loss(2.5, 9.0, 0.0).total == 2.5);
  const auto r = total_loss(0.37, 0.21, 0.3, 4.0);
  CHECK(r.total == r.td + r.lambda * r.group_reg);
  CHECK(r.group_raw == 4.0);
}

TEST_CASE("td targets bootstrap from the target network only") {
  const auto env = testing::tiny_env();
  const auto spec = testing::tiny_spec(env);
  num::RngStream rng(22, 0);
  auto online = policy::init_model_params(spec, rng);
  auto target = policy::init_model_params(spec, rng);
  policy::target_sync(online, target);
  const auto episodes = testing::play_episodes(env, spec, online, 3, 5);
  const auto ptrs = testing::pointers(episodes);
  const TransitionBatch batch(ptrs, spec);

  const double gamma = 0.9;
  const auto y = td_targets(batch, target, spec, gamma);
  REQUIRE(y.size() == batch.size());

  // Independent straight-line recomputation.
  const auto fw = policy::forward_agents(spec, target, batch.steps());
  const std::size_t n = spec.n_agents;
  std::vector<double> greedy_q(batch.size() * n);
  for (std::size_t r = 0; r < batch.size() * n; ++r) {
    double best = fw.heads.q.at(r, 0);
    for (std::size_t a = 1; a < spec.n_actions; ++a) best = std::max(best, fw.heads.q.at(r, a));
    greedy_q[r] = best;
  }
  const auto next = policy::mix(Tensor({batch.size(), n}, greedy_q), batch.states(), target).q_tot;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const double expect =
        batch.terminal()[i] ? batch.rewards()[i] : batch.rewards()[i] + gamma * next.at(i + 1);
    CHECK(std::abs(y[i] - expect) <= 1e-10);
    if (batch.terminal()[i]) CHECK(y[i] == batch.rewards()[i]);
  }

  for (auto& [name, t] : online) {
    for (auto& v : t.mutable_values()) v = 0.0;
  }
  const auto again = td_targets(batch, target, spec, gamma);
  CHECK(again == y);
  CHECK_THROWS_AS(td_targets(batch, target, spec, 1.0), ParameterError);
}

TEST_CASE("td loss on a single transition equals the hand-rolled value") {
  const auto env = testing::tiny_env();
  const auto spec = testing::tiny_spec(env);
  num::RngStream rng(23, 0);
  const auto online = policy::init_model_params(spec, rng);
  const auto target = policy::init_model_params(spec, rng);
  auto episodes = testing::play_episodes(env, spec, online, 1, 6);
  episodes[0].steps.resize(1);
  episodes[0].steps[0].done = true;
  episodes[0].steps[0].reward = 1.5;
  const auto ptrs = testing::pointers(episodes);
  const TransitionBatch batch(ptrs, spec);

  const auto fw = policy::forward_agents(spec, online, batch.steps());
  std::vector<double> chosen;
  for (std::size_t i = 0; i < spec.n_agents; ++i) {
    chosen.push_back(fw.heads.q.at(i, static_cast<std::size_t>(episodes[0].steps[0].actions[i])));
  }
  const double q_tot =
      policy::mix(Tensor({1, spec.n_agents}, chosen), batch.states(), online).q_tot.item();
  const double expect = (1.5 - q_tot) * (1.5 - q_tot);
  CHECK(std::abs(td_loss(batch, online, target, spec, 0.95).item() - expect) <= 1e-10);
}

TEST_CASE("td loss vanishes when rewards equal the online prediction") {
  const auto env = testing::tiny_env();
  const auto spec = testing::tiny_spec(env);
  num::RngStream rng(24, 0);
  const auto online = policy::init_model_params(spec, rng);
  const auto target = policy::init_model_params(spec, rng);
  auto episodes = testing::play_episodes(env, spec, online, 2, 7);
  {
    const auto ptrs = testing::pointers(episodes);
    const TransitionBatch batch(ptrs, spec);
    const auto boot = td_targets(batch, target, spec, 0.9);
    const auto fw = policy::forward_agents(spec, online, batch.steps());
    auto chosen = num::reshape(num::gather_cols(fw.heads.q, batch.actions()),
                               {batch.size(), spec.n_agents});
    const auto q = policy::mix(chosen, batch.states(), online).q_tot;
    std::size_t i = 0;
    for (auto& ep : episodes) {
      for (auto& s : ep.steps) {
        s.reward = q.at(i) - (boot[i] - s.reward);
        ++i;
      }
    }
  }
  const auto ptrs = testing::pointers(episodes);
  const TransitionBatch batch(ptrs, spec);
  CHECK(td_loss(batch, online, target, spec, 0.9).item() <= 1e-24);
}

TEST_CASE("replay buffer is a FIFO with exhaustive, deterministic sampling") {
  auto make = [](double r) {
    EpisodeRecord e;
    e.n_agents = 1;
    e.obs_size = 1;
    StepRecord s;
    s.observations = {r};
    s.actions = {0};
    s.reward = r;
    s.done = true;
    e.steps.push_back(s);
    return e;
  };
  ReplayBuffer buf(2);
  for (int i = 0; i < 3; ++i) buf.push(make(i));
  CHECK(buf.size() == 2);
  CHECK(buf.at(0).total_return() == 1.0);
  CHECK(buf.at(1).total_return() == 2.0);

  ReplayBuffer big(10);
  for (int i = 0; i < 6; ++i) big.push(make(i));
  num::RngStream rng(25, 0);
  auto all = big.sample(6, rng);
  std::vector<double> seen;
  for (const auto* e : all) seen.push_back(e->total_return());
  std::sort(seen.begin(), seen.end());
  CHECK(seen == std::vector<double>{0, 1, 2, 3, 4, 5});

  num::RngStream a(26, 0), b(26, 0);
  CHECK(big.sample(3, a) == big.sample(3, b));
  CHECK_THROWS_AS(big.sample(7, rng), ContractViolation);
  CHECK_THROWS_AS(ReplayBuffer(0), ParameterError);
}

TEST_CASE("episode windows are zero-padded and oldest first") {
  EpisodeRecord e;
  e.n_agents = 2;
  e.obs_size = 1;
  e.window_length = 3;
  for (int t = 0; t < 3; ++t) {
    StepRecord s;
    s.observations = {double(t + 1), double(10 * (t + 1))};
    s.actions = {0, 0};
    s.done = t == 2;
    e.steps.push_back(s);
  }
  e.validate();
  CHECK(e.window(0) == std::vector<double>{0, 0, 1, 0, 0, 10});
  CHECK(e.window(1) == std::vector<double>{0, 1, 2, 0, 10, 20});
  CHECK(e.window(2) == std::vector<double>{1, 2, 3, 10, 20, 30});
  CHECK_THROWS_AS(e.window(3), ContractViolation);

  e.steps[1].done = true;
  CHECK_THROWS_AS(e.validate(), ContractViolation);
  e.steps[1].done = false;
  e.steps[0].actions = {0};
  CHECK_THROWS_AS(e.validate(), ContractViolation);
}

TEST_CASE("adam leaves parameters alone under zero gradients") {
  num::ParameterSet p;
  p.add("w", Tensor({3}, {1.0, -2.0, 0.5}));
  p.zero_grad();
  AdamState state;
  for (int i = 0; i < 10; ++i) optimizer_step(p, state, AdamConfig{});
  CHECK(p.at("w").values()[0] == 1.0);
  CHECK(p.at("w").values()[1] == -2.0);
  CHECK(p.at("w").values()[2] == 0.5);
}

TEST_CASE("adam descends a quadratic bowl") {
  num::ParameterSet p;
  p.add("theta", Tensor({1}, {1.0}));
  AdamState state;
  AdamConfig config;
  config.lr = 1e-2;
  for (int i = 0; i < 2000; ++i) {
    p.zero_grad();
    const auto& th = p.at("theta");
    num::backward(num::scale(num::sum(num::square(th)), 0.5));
    optimizer_step(p, state, config);
  }
  CHECK(std::abs(p.at("theta").item()) < 1e-3);
}

TEST_CASE("gradient clipping caps the global norm") {
  num::ParameterSet p;
  p.add("a", Tensor({2}, {0.0, 0.0}));
  p.add("b", Tensor({1}, {0.0}));
  p.zero_grad();
  num::backward(num::sum(num::add(num::scale(num::sum(p.at("a")), 30.0),
                                  num::scale(num::sum(p.at("b")), 40.0))));
  const double before = clip_grad_norm(p, 10.0);
  CHECK(before == doctest::Approx(std::sqrt(30.0 * 30 * 2 + 40.0 * 40)));
  double ss = 0.0;
  for (const auto& [name, t] : p) {
    for (double g : t.grad()) ss += g * g;
  }
  CHECK(std::sqrt(ss) == doctest::Approx(10.0).epsilon(1e-12));

  p.zero_grad();
  num::backward(num::scale(num::sum(p.at("b")), 3.0));
  CHECK(clip_grad_norm(p, 10.0) == doctest::Approx(3.0));
  CHECK(p.at("b").grad()[0] == 3.0);
}

TEST_CASE("non-finite gradients abort the update and name the parameter") {
  num::ParameterSet p;
  p.add("layer.w", Tensor({2}, {1.0, 1.0}));
  p.zero_grad();
  num::backward(num::sum(p.at("layer.w")));
  p.at("layer.w").mutable_grad()[1] = std::nan("");
  AdamState state;
  try {
    optimizer_step(p, state, AdamConfig{});
    FAIL("expected NumericalError");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("layer.w") != std::string::npos);
  }
}

TEST_CASE("epsilon anneals linearly and scopes parse") {
  TrainConfig c;
  c.epsilon_start = 1.0;
  c.epsilon_end = 0.05;
  c.epsilon_anneal_steps = 100;
  CHECK(c.epsilon_at(0) == 1.0);
  CHECK(c.epsilon_at(50) == doctest::Approx(0.525));
  CHECK(c.epsilon_at(100) == 0.05);
  CHECK(c.epsilon_at(1000) == 0.05);
  CHECK(parse_group_loss_scope("all") == GroupLossScope::kAll);
  CHECK(parse_group_loss_scope("policy_only") == GroupLossScope::kPolicyOnly);
  CHECK(to_string(GroupLossScope::kPolicyOnly) == "policy_only");
  CHECK_THROWS_AS(parse_group_loss_scope("most"), ParameterError);
}

namespace {

struct Fixture {
  env::EnvConfig env = testing::tiny_env();
  policy::ModelSpec spec = testing::tiny_spec(env);
  num::ParameterSet params;
  std::vector<EpisodeRecord> episodes;

  explicit Fixture(std::uint64_t seed, std::size_t count = 4) {
    num::RngStream rng(seed, 100);
    params = policy::init_model_params(spec, rng);
    episodes = testing::play_episodes(env, spec, params, count, seed);
  }
  ReplayBuffer buffer() const {
    ReplayBuffer b(count() + 1);
    for (const auto& e : episodes) b.push(e);
    return b;
  }
  std::size_t count() const { return episodes.size(); }
};

std::map<std::string, std::vector<double>> grads_of(num::ParameterSet& p, const Tensor& loss) {
  p.zero_grad();
  num::backward(loss);
  std::map<std::string, std::vector<double>> out;
  for (const auto& [name, t] : p) {
    out[name] = t.has_grad() ? std::vector<double>(t.grad().begin(), t.grad().end())
                             : std::vector<double>(t.numel(), 0.0);
  }
  return out;
}

}  // namespace

TEST_CASE("train steps are deterministic") {
  Fixture fx(30);
  const auto buf = fx.buffer();
  TrainConfig config;
  config.batch_episodes = 2;
  auto run = [&] {
    num::RngStream init(1, 100), sample(1, 10);
    Learner learner(fx.spec, config, init);
    std::vector<double> totals;
    for (int i = 0; i < 5; ++i) totals.push_back(learner.train_step(buf, sample).total);
    return totals;
  };
  CHECK(run() == run());
}

TEST_CASE("lambda zero reports the group term but trains only on td") {
  Fixture fx(31);
  const auto ptrs = testing::pointers(fx.episodes);
  const TransitionBatch batch(ptrs, fx.spec);
  auto target = fx.params.clone();
  TrainConfig config;
  config.lambda = 0.0;
  const auto terms = compute_losses(batch, fx.params, target, fx.spec, config);
  CHECK(terms.group_raw > 0.0);
  CHECK(terms.group_reg.item() > 0.0);
  const auto with_zero = grads_of(fx.params, terms.total);
  const auto td_only = grads_of(fx.params, td_loss(batch, fx.params, target, fx.spec, config.gamma));
  CHECK(with_zero == td_only);
}

TEST_CASE("policy-only scope keeps the group term out of the graph and encoder") {
  Fixture fx(32);
  const auto ptrs = testing::pointers(fx.episodes);
  const TransitionBatch batch(ptrs, fx.spec);
  auto target = fx.params.clone();
  TrainConfig config;
  config.lambda = 1.0;
  config.group_loss_scope = GroupLossScope::kPolicyOnly;
  const auto scoped = grads_of(fx.params, compute_losses(batch, fx.params, target, fx.spec, config).total);
  const auto td_only = grads_of(fx.params, td_loss(batch, fx.params, target, fx.spec, config.gamma));
  config.group_loss_scope = GroupLossScope::kAll;
  const auto full = grads_of(fx.params, compute_losses(batch, fx.params, target, fx.spec, config).total);
  bool head_differs = false, upstream_differs = false;
  for (const auto& [name, g] : scoped) {
    const bool upstream = name.rfind("encoder.", 0) == 0 || name.rfind("attention.", 0) == 0 ||
                          name.rfind("gnn.", 0) == 0;
    if (upstream) {
      CHECK(g == td_only.at(name));
      if (full.at(name) != td_only.at(name)) upstream_differs = true;
    } else if (name.rfind("agent.", 0) == 0 && g != td_only.at(name)) {
      head_differs = true;
    }
  }
  CHECK(head_differs);
  CHECK(upstream_differs);
}

TEST_CASE("replayed graphs match the acting-time graphs bit for bit") {
  Fixture fx(33, 2);
  const auto ptrs = testing::pointers(fx.episodes);
  const TransitionBatch batch(ptrs, fx.spec);
  const auto replay = policy::forward_agents(fx.spec, fx.params, batch.steps());
  const std::size_t n = fx.spec.n_agents;

  // Re-play the stored streams and check the noise draws themselves.
  auto streams = RolloutStreams::derive(33, 0);
  env::PursuitEnv env(fx.env);
  std::size_t row = 0;
  for (const auto& ep : fx.episodes) {
    const auto again = rollout_episode(env, fx.spec, &fx.params, 1.0, streams).record;
    CHECK(again == ep);
    for (std::size_t t = 0; t < ep.length(); ++t, ++row) {
      const auto part = ep.partition(t);
      policy::TimestepBatch one;
      one.observations = Tensor({n, fx.spec.obs_size}, ep.steps[t].observations);
      one.windows = Tensor({n, fx.spec.window_width()}, ep.window(t));
      one.partitions = {&part};
      one.noise = {ep.steps[t].noise};
      const auto acting = policy::forward_agents(fx.spec, fx.params, one);
      const auto replayed = replay.graph.normalized.values().subspan(row * n * n, n * n);
      CHECK(std::memcmp(acting.graph.normalized.values().data(), replayed.data(),
                        n * n * sizeof(double)) == 0);
    }
  }
}

TEST_CASE("a tiny buffer can be overfit") {
  Fixture fx(34, 2);
  ReplayBuffer buf(2);
  for (const auto& e : fx.episodes) buf.push(e);
  TrainConfig config;
  config.batch_episodes = 2;
  config.lr = 1e-3;
  num::RngStream init(2, 100), sample(2, 10);
  Learner learner(fx.spec, config, init);
  std::vector<double> td;
  for (int i = 0; i < 500; ++i) td.push_back(learner.train_step(buf, sample).td);
  double first = 0.0, last = 0.0;
  for (int i = 0; i < 20; ++i) {
    first += td[i];
    last += td[td.size() - 1 - i];
  }
  CHECK(last < 0.5 * first);
  CHECK(learner.updates() == 500);
}

TEST_CASE("total loss passes a gradient check on a two-episode batch") {
  const auto result = testing::full_chain_grad_check(2, 3);
  INFO("worst " << result.worst.worst_parameter << "[" << result.worst.worst_index << "] fd "
                << result.worst.worst_fd << " ad " << result.worst.worst_ad);
  CHECK(result.worst.max_relative_error <= 1e-5);
}

TEST_CASE("the target network is synced every target_period updates") {
  Fixture fx(35);
  const auto buf = fx.buffer();
  TrainConfig config;
  config.batch_episodes = 2;
  config.target_period = 3;
  num::RngStream init(3, 100), sample(3, 10);
  Learner learner(fx.spec, config, init);
  learner.train_step(buf, sample);
  learner.train_step(buf, sample);
  CHECK(learner.online().max_abs_diff(learner.target()) > 0.0);
  learner.train_step(buf, sample);
  CHECK(learner.online().max_abs_diff(learner.target()) == 0.0);
}
