#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "fsho/env.hpp"
#include "fsho/hmarl/network.hpp"
#include "fsho/hmarl/ppo.hpp"
#include "fsho/policy.hpp"

namespace fsho::hmarl {

inline constexpr int kHighActions = kMaxTransitionalFs;
inline constexpr int kLowActions = kNumFsOptions;

struct TrainConfig {
  int iterations = 200;
  int episodes_per_iter = 2;
  std::uint64_t seed = 1;
  int hidden = 64;
  int hidden_layers = 2;
  PpoConfig high{};
  PpoConfig low = [] {
    PpoConfig c;
    c.gamma = 0.80;
    return c;
  }();
  int checkpoint_every = 0;  // 0 disables periodic checkpoints
  std::optional<std::filesystem::path> checkpoint_dir;

  /// Throws ConfigError.
  void validate() const;
};

struct IterationStats {
  int iteration = 0;
  double mean_episode_r_cc = 0.0;  // per-episode sum of r_CC, averaged
  double mean_step_r_cc = 0.0;
  double mean_low_reward = 0.0;    // mean r_e per EC step
  double mean_objective = 0.0;
  double gops_violation_ratio = 0.0;
  double high_entropy = 0.0;
  double low_entropy = 0.0;
  double high_loss = 0.0;
  double low_loss = 0.0;
};

struct TrainResult {
  PolicyParams high;
  PolicyParams low;  // shared by every EC agent
  std::vector<IterationStats> curve;
};

using IterationCallback = std::function<void(const IterationStats&, const TrainResult&)>;

/// Turn-based rollouts followed by one PPO update per level. The CC
/// trajectory is credited r_CC, each EC trajectory its own r_e; the shared
/// low policy takes the mean of the per-EC gradients every minibatch.
/// A non-finite update writes checkpoint_<iter>.bin (if a directory is
/// configured) with the last good parameters and rethrows TrainingError.
TrainResult train(const EnvConfig& env_cfg, const TrainConfig& cfg,
                  const IterationCallback& on_iteration = {});

struct Checkpoint {
  int iteration = 0;
  PolicyParams high;
  PolicyParams low;
};

/// Versioned little-endian binary with a shape header. Throws IoError.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
/// Throws IoError on read failure, SchemaError on a bad header or shape.
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::filesystem::path checkpoint_path(const std::filesystem::path& dir, int iteration);

class HmarlPolicy final : public Policy {
 public:
  /// Greedy unless a sampling seed is given.
  HmarlPolicy(PolicyParams high, PolicyParams low, std::optional<std::uint64_t> sample_seed = {});

  [[nodiscard]] std::string name() const override { return "hmarl"; }
  int act_high(const Env& env, const HighObs& obs) override;
  std::vector<int> act_low(const Env& env, std::span<const LowObs> obs) override;

 private:
  PolicyParams high_;
  PolicyParams low_;
  std::optional<Rng> rng_;
};

}  // namespace fsho::hmarl
