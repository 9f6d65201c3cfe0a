#include "fsho/hmarl/trainer.hpp"

#include <spdlog/spdlog.h>

#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "fsho/errors.hpp"

namespace fsho::hmarl {

void TrainConfig::validate() const {
  if (iterations < 1) throw ConfigError("train.iterations must be >= 1");
  if (episodes_per_iter < 1) throw ConfigError("train.episodes_per_iter must be >= 1");
  if (hidden < 1) throw ConfigError("train.hidden must be >= 1");
  if (hidden_layers < 0) throw ConfigError("train.hidden_layers must be >= 0");
  if (checkpoint_every < 0) throw ConfigError("train.checkpoint_every must be >= 0");
  high.validate();
  low.validate();
}

namespace {

template <std::size_t N>
std::vector<double> to_vec(const std::array<double, N>& a) {
  return {a.begin(), a.end()};
}

double mean_entropy(const Batch& b, const PolicyParams& p) {
  PpoConfig cfg;
  return ppo_loss(p, b, cfg).entropy;
}

struct Rollout {
  Trajectory high;
  std::vector<Trajectory> low;  // one per EC
  double sum_r_cc = 0.0;
  double sum_r_low = 0.0;
  double sum_objective = 0.0;
  int gops_violation_steps = 0;
  int steps = 0;
};

Rollout collect_episode(Env& env, std::uint64_t episode_seed, const PolicyParams& high,
                        const PolicyParams& low, Rng& rng) {
  const auto& cfg = env.config();
  const int n_ecs = cfg.n_ecs();
  Rollout r;
  r.low.resize(static_cast<std::size_t>(n_ecs));

  HighObs hobs = env.reset(episode_seed);
  while (!env.done()) {
    Transition ht;
    ht.obs = to_vec(hobs.features(cfg));
    const auto hout = forward_policy(high, ht.obs);
    const auto hs = sample_action(hout.probs, rng);
    ht.action = hs.action;
    ht.log_prob = hs.log_prob;
    ht.value = hout.value;

    const auto lobs = env.step_high(hs.action + 1);
    std::vector<int> actions(static_cast<std::size_t>(n_ecs));
    std::vector<Transition> lts(static_cast<std::size_t>(n_ecs));
    for (int e = 0; e < n_ecs; ++e) {
      auto& lt = lts[static_cast<std::size_t>(e)];
      lt.obs = to_vec(lobs[static_cast<std::size_t>(e)].features(cfg));
      const auto lout = forward_policy(low, lt.obs);
      const auto ls = sample_action(lout.probs, rng);
      lt.action = ls.action;
      lt.log_prob = ls.log_prob;
      lt.value = lout.value;
      actions[static_cast<std::size_t>(e)] = ls.action + 1;
    }

    const auto out = env.step_low(actions);
    const auto& res = out.result;
    ht.reward = res.high_reward;
    ht.done = out.done;
    r.high.steps.push_back(std::move(ht));
    for (int e = 0; e < n_ecs; ++e) {
      auto& lt = lts[static_cast<std::size_t>(e)];
      lt.reward = res.low_rewards[static_cast<std::size_t>(e)];
      lt.done = out.done;
      r.sum_r_low += lt.reward;
      r.low[static_cast<std::size_t>(e)].steps.push_back(std::move(lt));
    }
    r.sum_r_cc += res.high_reward;
    r.sum_objective += res.objective;
    if (res.violations.any_gops()) ++r.gops_violation_steps;
    ++r.steps;
    if (!out.done) hobs = env.high_obs();
  }
  return r;
}

std::uint64_t mix(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

void write_failure_checkpoint(const TrainConfig& cfg, int iteration, const TrainResult& last_good) {
  if (!cfg.checkpoint_dir) return;
  const auto path = checkpoint_path(*cfg.checkpoint_dir, iteration);
  save_checkpoint(path, {iteration, last_good.high, last_good.low});
  spdlog::error("training diverged at iteration {}; last good parameters saved to {}", iteration,
                path.string());
}

}  // namespace

TrainResult train(const EnvConfig& env_cfg, const TrainConfig& cfg,
                  const IterationCallback& on_iteration) {
  env_cfg.validate();
  cfg.validate();

  Rng rng(mix(cfg.seed));
  TrainResult result;
  result.high = make_policy({kHighObsDim, kHighActions, cfg.hidden, cfg.hidden_layers}, rng);
  result.low = make_policy({kLowObsDim, kLowActions, cfg.hidden, cfg.hidden_layers}, rng);
  Adam high_opt(num_params(result.high), cfg.high.learning_rate);
  Adam low_opt(num_params(result.low), cfg.low.learning_rate);

  Env env(env_cfg);
  const int n_ecs = env_cfg.n_ecs();
  std::uint64_t episode_counter = 0;

  for (int it = 1; it <= cfg.iterations; ++it) {
    std::vector<Trajectory> high_trajs;
    std::vector<std::vector<Trajectory>> low_trajs(static_cast<std::size_t>(n_ecs));
    IterationStats stats;
    stats.iteration = it;
    int total_steps = 0;
    double sum_low = 0.0;
    int gops_steps = 0;

    for (int ep = 0; ep < cfg.episodes_per_iter; ++ep) {
      const std::uint64_t episode_seed = mix(cfg.seed ^ mix(++episode_counter));
      auto r = collect_episode(env, episode_seed, result.high, result.low, rng);
      compute_gae(r.high, cfg.high.gamma, cfg.high.gae_lambda);
      for (int e = 0; e < n_ecs; ++e) {
        auto& t = r.low[static_cast<std::size_t>(e)];
        compute_gae(t, cfg.low.gamma, cfg.low.gae_lambda);
        low_trajs[static_cast<std::size_t>(e)].push_back(std::move(t));
      }
      high_trajs.push_back(std::move(r.high));
      stats.mean_episode_r_cc += r.sum_r_cc / cfg.episodes_per_iter;
      stats.mean_step_r_cc += r.sum_r_cc;
      stats.mean_objective += r.sum_objective;
      sum_low += r.sum_r_low;
      gops_steps += r.gops_violation_steps;
      total_steps += r.steps;
    }
    stats.mean_step_r_cc /= total_steps;
    stats.mean_objective /= total_steps;
    stats.mean_low_reward = sum_low / (static_cast<double>(total_steps) * n_ecs);
    stats.gops_violation_ratio = static_cast<double>(gops_steps) / total_steps;

    Batch high_batch = make_batch(high_trajs);
    std::vector<Batch> low_batches;
    low_batches.reserve(static_cast<std::size_t>(n_ecs));
    for (const auto& trajs : low_trajs) low_batches.push_back(make_batch(trajs));

    const TrainResult last_good = result;
    try {
      stats.high_loss = ppo_update(result.high, high_opt, high_batch, cfg.high, rng).mean_total;
      stats.low_loss =
          ppo_update_shared(result.low, low_opt, low_batches, cfg.low, rng).mean_total;
    } catch (const TrainingError&) {
      write_failure_checkpoint(cfg, it, last_good);
      throw;
    }
    stats.high_entropy = mean_entropy(high_batch, result.high);
    stats.low_entropy = mean_entropy(low_batches.front(), result.low);

    spdlog::debug("iter {} r_cc/ep {:.3f} objective {:.4f} gops_viol {:.3f} H_high {:.3f} H_low {:.3f}",
                  it, stats.mean_episode_r_cc, stats.mean_objective, stats.gops_violation_ratio,
                  stats.high_entropy, stats.low_entropy);
    result.curve.push_back(stats);
    if (cfg.checkpoint_dir && cfg.checkpoint_every > 0 &&
        (it % cfg.checkpoint_every == 0 || it == cfg.iterations)) {
      save_checkpoint(checkpoint_path(*cfg.checkpoint_dir, it), {it, result.high, result.low});
    }
    if (on_iteration) on_iteration(stats, result);
  }
  return result;
}

// ---- checkpoints ----

namespace {

constexpr std::array<char, 8> kMagic = {'F', 'S', 'H', 'O', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kCheckpointVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

class Writer {
 public:
  explicit Writer(const std::filesystem::path& path) : path_(path), out_(path, std::ios::binary) {
    if (!out_) throw IoError("cannot open " + path.string() + " for writing");
  }
  template <typename T>
  void put(const T& v) {
    out_.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  void put_doubles(const double* data, Eigen::Index n) {
    out_.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * sizeof(double)));
  }
  void finish() {
    out_.flush();
    if (!out_) throw IoError("write failed: " + path_.string());
  }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

class Reader {
 public:
  explicit Reader(const std::filesystem::path& path) : path_(path), in_(path, std::ios::binary) {
    if (!in_) throw IoError("cannot open " + path.string());
  }
  template <typename T>
  T get() {
    T v{};
    in_.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in_) throw SchemaError("truncated checkpoint: " + path_.string());
    return v;
  }
  void get_doubles(double* data, Eigen::Index n) {
    in_.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(n * sizeof(double)));
    if (!in_) throw SchemaError("truncated checkpoint: " + path_.string());
  }
  [[nodiscard]] bool at_end() { return in_.peek() == std::char_traits<char>::eof(); }

 private:
  std::filesystem::path path_;
  std::ifstream in_;
};

void write_mlp_shape(Writer& w, const Mlp& m) {
  w.put(static_cast<std::uint32_t>(m.layers.size()));
  for (const auto& l : m.layers) {
    w.put(static_cast<std::uint32_t>(l.weight.rows()));
    w.put(static_cast<std::uint32_t>(l.weight.cols()));
  }
}

void write_mlp_data(Writer& w, const Mlp& m) {
  for (const auto& l : m.layers) {
    w.put_doubles(l.weight.data(), l.weight.size());
    w.put_doubles(l.bias.data(), l.bias.size());
  }
}

Mlp read_mlp_shape(Reader& r) {
  const auto n_layers = r.get<std::uint32_t>();
  if (n_layers == 0 || n_layers > 64) throw SchemaError("checkpoint: implausible layer count");
  Mlp m;
  std::uint32_t prev_out = 0;
  for (std::uint32_t i = 0; i < n_layers; ++i) {
    const auto rows = r.get<std::uint32_t>();
    const auto cols = r.get<std::uint32_t>();
    if (rows == 0 || cols == 0 || rows > 1u << 16 || cols > 1u << 16) {
      throw SchemaError("checkpoint: implausible layer shape");
    }
    if (i > 0 && cols != prev_out) throw SchemaError("checkpoint: layer shapes do not chain");
    prev_out = rows;
    m.layers.push_back({Eigen::MatrixXd(rows, cols), Eigen::VectorXd(rows)});
  }
  return m;
}

void read_mlp_data(Reader& r, Mlp& m) {
  for (auto& l : m.layers) {
    r.get_doubles(l.weight.data(), l.weight.size());
    r.get_doubles(l.bias.data(), l.bias.size());
  }
}

}  // namespace

std::filesystem::path checkpoint_path(const std::filesystem::path& dir, int iteration) {
  return dir / ("checkpoint_" + std::to_string(iteration) + ".bin");
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  Writer w(path);
  w.put(kMagic);
  w.put(kCheckpointVersion);
  w.put(static_cast<std::int32_t>(ckpt.iteration));
  for (const PolicyParams* p : {&ckpt.high, &ckpt.low}) {
    write_mlp_shape(w, p->actor);
    write_mlp_shape(w, p->critic);
  }
  for (const PolicyParams* p : {&ckpt.high, &ckpt.low}) {
    write_mlp_data(w, p->actor);
    write_mlp_data(w, p->critic);
  }
  w.finish();
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  Reader r(path);
  if (r.get<std::array<char, 8>>() != kMagic) {
    throw SchemaError("not a checkpoint file: " + path.string());
  }
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw SchemaError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint c;
  c.iteration = r.get<std::int32_t>();
  for (PolicyParams* p : {&c.high, &c.low}) {
    p->actor = read_mlp_shape(r);
    p->critic = read_mlp_shape(r);
    if (p->actor.input_dim() != p->critic.input_dim() || p->critic.output_dim() != 1) {
      throw SchemaError("checkpoint: actor/critic shapes disagree");
    }
  }
  if (c.high.obs_dim() != kHighObsDim || c.high.n_actions() != kHighActions ||
      c.low.obs_dim() != kLowObsDim || c.low.n_actions() != kLowActions) {
    throw SchemaError("checkpoint: policy dimensions do not match the environment");
  }
  for (PolicyParams* p : {&c.high, &c.low}) {
    read_mlp_data(r, p->actor);
    read_mlp_data(r, p->critic);
  }
  if (!r.at_end()) throw SchemaError("checkpoint: trailing bytes in " + path.string());
  if (!all_finite(c.high) || !all_finite(c.low)) {
    throw SchemaError("checkpoint: non-finite parameters");
  }
  return c;
}

// ---- evaluation policy ----

HmarlPolicy::HmarlPolicy(PolicyParams high, PolicyParams low,
                         std::optional<std::uint64_t> sample_seed)
    : high_(std::move(high)), low_(std::move(low)) {
  if (high_.obs_dim() != kHighObsDim || high_.n_actions() != kHighActions ||
      low_.obs_dim() != kLowObsDim || low_.n_actions() != kLowActions) {
    throw ContractError("HmarlPolicy: policy dimensions do not match the environment");
  }
  if (sample_seed) rng_.emplace(*sample_seed);
}

int HmarlPolicy::act_high(const Env& env, const HighObs& obs) {
  const auto f = obs.features(env.config());
  if (rng_) return sample_action(forward_policy(high_, f).probs, *rng_).action + 1;
  return act_greedy(high_, f) + 1;
}

std::vector<int> HmarlPolicy::act_low(const Env& env, std::span<const LowObs> obs) {
  std::vector<int> out;
  out.reserve(obs.size());
  for (const auto& o : obs) {
    const auto f = o.features(env.config());
    out.push_back(rng_ ? sample_action(forward_policy(low_, f).probs, *rng_).action + 1
                       : act_greedy(low_, f) + 1);
  }
  return out;
}

}  // namespace fsho::hmarl
