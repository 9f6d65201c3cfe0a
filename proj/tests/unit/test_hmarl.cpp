#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <vector>

#include "doctest.h"
#include "fsho/errors.hpp"
#include "fsho/hmarl/network.hpp"
#include "fsho/hmarl/ppo.hpp"
#include "fsho/hmarl/trainer.hpp"
#include "gradcheck.hpp"

using namespace fsho;
using namespace fsho::hmarl;

namespace {

PolicyParams random_policy(int obs, int actions, int hidden, std::uint64_t seed, double scale = 0.5) {
  Rng rng(seed);
  auto p = make_policy({obs, actions, hidden, 2}, rng);
  std::normal_distribution<double> n(0.0, scale);
  Eigen::VectorXd flat(static_cast<Eigen::Index>(num_params(p)));
  for (Eigen::Index i = 0; i < flat.size(); ++i) flat[i] = n(rng);
  unflatten(p, flat);
  return p;
}

Eigen::VectorXd probs_of(std::initializer_list<double> v) {
  Eigen::VectorXd p(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) p[i++] = x;
  return p;
}

}  // namespace

TEST_SUITE("hmarl") {

TEST_CASE("forward pass gives a normalised distribution and is pure") {
  const auto p = random_policy(7, 7, 16, 1);
  const std::vector<double> obs{0.1, -0.3, 0.5, 1.0, 0.0, 0.2, -1.0};
  const auto a = forward_policy(p, obs);
  CHECK(a.probs.sum() == doctest::Approx(1.0).epsilon(1e-9));
  CHECK((a.probs.array() >= 0.0).all());
  const auto b = forward_policy(p, obs);
  CHECK(a.probs == b.probs);
  CHECK(a.value == b.value);
  CHECK_THROWS_AS(forward_policy(p, std::vector<double>{1.0, 2.0}), ContractError);
}

TEST_CASE("zero weights give the uniform distribution") {
  auto p = random_policy(3, 4, 8, 2);
  unflatten(p, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(num_params(p))));
  const auto out = forward_policy(p, std::vector<double>{1.0, 2.0, 3.0});
  for (Eigen::Index i = 0; i < 4; ++i) CHECK(out.probs[i] == 0.25);
}

TEST_CASE("sampling") {
  Rng rng(1);
  const auto degenerate = sample_action(probs_of({1.0, 0.0, 0.0, 0.0}), rng);
  CHECK(degenerate.action == 0);
  CHECK(degenerate.log_prob == 0.0);

  const auto dist = probs_of({0.1, 0.4, 0.2, 0.3});
  Rng r1(7), r2(7);
  for (int i = 0; i < 100; ++i) CHECK(sample_action(dist, r1).action == sample_action(dist, r2).action);

  Rng mc(11);
  std::vector<int> counts(4, 0);
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const auto s = sample_action(dist, mc);
    CHECK(s.log_prob == std::log(dist[s.action]));
    ++counts[static_cast<std::size_t>(s.action)];
  }
  for (int a = 0; a < 4; ++a) {
    CHECK(std::abs(static_cast<double>(counts[static_cast<std::size_t>(a)]) / n - dist[a]) < 0.01);
  }
}

TEST_CASE("greedy action") {
  CHECK(argmax_action(probs_of({0.1, 0.7, 0.2})) == 1);
  CHECK(argmax_action(probs_of({0.25, 0.25, 0.25, 0.25})) == 0);
  const auto high = random_policy(kHighObsDim, kHighActions, 8, 3);
  Rng rng(4);
  std::normal_distribution<double> n(0.0, 3.0);
  for (int i = 0; i < 200; ++i) {
    const std::vector<double> obs{n(rng), n(rng), n(rng)};
    const int a = act_greedy(high, obs) + 1;
    CHECK(a >= 1);
    CHECK(a <= 4);
  }
}

TEST_CASE("clipped surrogate examples and bound") {
  CHECK(clipped_surrogate(1.5, 1.0, 0.2) == doctest::Approx(1.2));
  CHECK(clipped_surrogate(0.5, -1.0, 0.2) == doctest::Approx(-0.8));
  Rng rng(5);
  std::uniform_real_distribution<double> ratio(0.0, 5.0), adv(-3.0, 3.0);
  for (int i = 0; i < 1000; ++i) {
    const double r = ratio(rng), a = adv(rng);
    CHECK(clipped_surrogate(r, a, 0.2) <= 1.2 * std::abs(a) + 1e-12);
  }
}

TEST_CASE("GAE against direct recursions") {
  Trajectory t;
  const std::vector<double> rewards{1.0, 0.5, -0.2, 2.0};
  const std::vector<double> values{0.3, 0.1, 0.7, -0.4};
  for (std::size_t i = 0; i < rewards.size(); ++i) {
    Transition s;
    s.reward = rewards[i];
    s.value = values[i];
    s.done = i + 1 == rewards.size();
    t.steps.push_back(s);
  }
  const double gamma = 0.8;

  // lambda = 1: returns are discounted reward-to-go
  compute_gae(t, gamma, 1.0);
  REQUIRE(t.advantages.size() == t.steps.size());
  for (std::size_t i = 0; i < rewards.size(); ++i) {
    double g = 0.0, disc = 1.0;
    for (std::size_t k = i; k < rewards.size(); ++k, disc *= gamma) g += disc * rewards[k];
    CHECK(t.returns[i] == doctest::Approx(g).epsilon(1e-12));
  }

  // lambda = 0: one-step TD errors
  compute_gae(t, gamma, 0.0);
  for (std::size_t i = 0; i < rewards.size(); ++i) {
    const double next = i + 1 < rewards.size() ? values[i + 1] : 0.0;
    CHECK(t.advantages[i] == doctest::Approx(rewards[i] + gamma * next - values[i]).epsilon(1e-12));
  }
}

TEST_CASE("analytic gradients match central differences, each term alone") {
  const PpoConfig cfg;
  for (const LossWeights w : {LossWeights{1, 0, 0}, LossWeights{0, 1, 0}, LossWeights{0, 0, 1},
                              LossWeights{1, 1, 1}}) {
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      const auto p = random_policy(8, 5, 6, seed);
      Rng rng(seed + 100);
      const auto batch = testing::random_batch(p, 12, rng, cfg.clip);
      const auto r = testing::check_gradients(p, batch, cfg, w);
      CHECK(r.max_rel_error < 1e-4);
    }
  }
}

TEST_CASE("aggregation") {
  const auto a = random_policy(7, 7, 8, 1);
  const auto b = random_policy(7, 7, 8, 2);
  const auto c = random_policy(7, 7, 8, 3);
  CHECK(flatten(aggregate_shared_policy(std::vector<PolicyParams>{a, a})) == flatten(a));
  CHECK(flatten(aggregate_shared_policy(std::vector<PolicyParams>{a, a, a, a})).isApprox(flatten(a), 1e-15));

  auto neg = a;
  unflatten(neg, -flatten(a));
  CHECK(flatten(aggregate_shared_policy(std::vector<PolicyParams>{a, neg})).isZero(0.0));

  const auto abc = flatten(aggregate_shared_policy(std::vector<PolicyParams>{a, b, c}));
  const auto cab = flatten(aggregate_shared_policy(std::vector<PolicyParams>{c, a, b}));
  CHECK(abc.isApprox(cab, 1e-14));
  CHECK(abc.isApprox((flatten(a) + flatten(b) + flatten(c)) / 3.0, 1e-14));

  CHECK_THROWS_AS(aggregate_shared_policy(std::vector<PolicyParams>{}), ContractError);
  const auto other = random_policy(7, 7, 9, 1);
  CHECK_THROWS_AS(aggregate_shared_policy(std::vector<PolicyParams>{a, other}), ContractError);
}

TEST_CASE("PPO update raises the probability of advantaged actions") {
  auto p = random_policy(3, 4, 16, 9, 0.1);
  Rng rng(1);
  Batch b;
  const int n = 128;
  b.obs = Eigen::MatrixXd::Random(3, n);
  b.actions.resize(n);
  b.old_log_probs.resize(n);
  b.advantages.resize(n);
  b.returns = Eigen::VectorXd::Zero(n);
  for (int j = 0; j < n; ++j) {
    const int a = j % 4;
    b.actions[static_cast<std::size_t>(j)] = a;
    const auto out = forward_policy(p, std::span<const double>(b.obs.col(j).data(), 3));
    b.old_log_probs[j] = std::log(out.probs[a]);
    b.advantages[j] = a == 2 ? 1.0 : -0.3;
  }
  const std::vector<double> probe{0.0, 0.0, 0.0};
  const double before = forward_policy(p, probe).probs[2];
  PpoConfig cfg;
  cfg.learning_rate = 1e-2;
  Adam adam(num_params(p), cfg.learning_rate);
  for (int i = 0; i < 5; ++i) ppo_update(p, adam, b, cfg, rng);
  CHECK(forward_policy(p, probe).probs[2] > before);
}

TEST_CASE("non-finite loss aborts the update with diagnostics") {
  auto p = random_policy(3, 4, 8, 1);
  Rng rng(2);
  auto b = testing::random_batch(p, 16, rng, 0.2);
  b.returns[3] = std::numeric_limits<double>::quiet_NaN();
  Adam adam(num_params(p), 3e-4);
  CHECK_THROWS_WITH_AS(ppo_update(p, adam, b, PpoConfig{}, rng), doctest::Contains("non-finite"),
                       TrainingError);
}

TEST_CASE("PPO config validation") {
  PpoConfig c;
  c.clip = 1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  TrainConfig t;
  CHECK(t.high.gamma == 0.99);
  CHECK(t.low.gamma == 0.80);
  CHECK(t.high.entropy_coef == 0.01);
  CHECK(t.low.entropy_coef == 0.01);
}

TEST_CASE("checkpoint round trip and corruption") {
  const auto dir = std::filesystem::temp_directory_path() / "fsho_test_ckpt";
  std::filesystem::create_directories(dir);
  const Checkpoint c{17, random_policy(kHighObsDim, kHighActions, 8, 1),
                     random_policy(kLowObsDim, kLowActions, 8, 2)};
  const auto path = checkpoint_path(dir, 17);
  CHECK(path.filename() == "checkpoint_17.bin");
  save_checkpoint(path, c);
  const auto back = load_checkpoint(path);
  CHECK(back.iteration == 17);
  CHECK(flatten(back.high) == flatten(c.high));
  CHECK(flatten(back.low) == flatten(c.low));

  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(0);
    f.put('X');
  }
  CHECK_THROWS_AS(load_checkpoint(path), SchemaError);
  std::filesystem::resize_file(path, 20);
  CHECK_THROWS_AS(load_checkpoint(path), SchemaError);
  CHECK_THROWS_AS(load_checkpoint(dir / "missing.bin"), IoError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("short training run is deterministic and follows the turn protocol") {
  EnvConfig env;
  env.n_users = 20;
  env.episode_len = 20;
  TrainConfig cfg;
  cfg.iterations = 3;
  cfg.episodes_per_iter = 1;
  cfg.hidden = 16;
  int calls = 0;
  const auto a = train(env, cfg, [&](const IterationStats& s, const TrainResult&) {
    ++calls;
    CHECK(std::isfinite(s.mean_episode_r_cc));
  });
  CHECK(calls == 3);
  CHECK(a.curve.size() == 3);
  const auto b = train(env, cfg);
  CHECK(flatten(a.high) == flatten(b.high));
  CHECK(flatten(a.low) == flatten(b.low));

  // rolling the trained policy: one high and |E| low actions per step
  Env e(env);
  e.reset(1);
  HmarlPolicy policy(a.high, a.low);
  while (!e.done()) {
    const int h = policy.act_high(e, e.high_obs());
    CHECK(h >= 1);
    CHECK(h <= 4);
    const auto lobs = e.step_high(h);
    const auto low = policy.act_low(e, lobs);
    CHECK(low.size() == 2);
    e.step_low(low);
  }
}

}  // TEST_SUITE
