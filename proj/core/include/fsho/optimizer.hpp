#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fsho/env.hpp"
#include "fsho/policy.hpp"

namespace fsho {

struct PolicyKind {
  enum class Tag { static_fs, random, brute_force_optimal, learned };

  Tag tag = Tag::static_fs;
  int fs = 3;  // only for static_fs

  /// Accepts "static:<f>", "random", "optimal", "hmarl". Throws ConfigError.
  static PolicyKind parse(const std::string& text);
  [[nodiscard]] std::string to_string() const;

  friend bool operator==(const PolicyKind&, const PolicyKind&) = default;
};

/// {1..4} x {1..7}^n_ecs, lexicographic with the last EC varying fastest.
std::vector<GroupAssignment> enumerate_configs(int n_ecs);

enum class OptimalCriterion {
  objective,   // omega_nt R(U\T) + omega_t R(T)
  reward_sum,  // r_CC, which already contains every r_e
};

struct OptimalChoice {
  GroupAssignment assignment;
  double value = 0.0;
  TimestepResult result;
};

/// Evaluates every assignment on the current timestep and returns the best.
/// Ties go to the lexicographically first assignment.
OptimalChoice brute_force_optimal(const Env& env,
                                  OptimalCriterion criterion = OptimalCriterion::objective,
                                  std::optional<std::uint64_t> eval_seed = {});

struct StaticActions {
  int high = 0;
  std::vector<int> low;
  bool clamped = false;
};

/// Static FS f for both groups; the CC action is clamped to 4 when f > 4.
StaticActions static_policy_step(int fs, int n_ecs);

class StaticPolicy final : public Policy {
 public:
  explicit StaticPolicy(int fs);

  [[nodiscard]] std::string name() const override;
  int act_high(const Env& env, const HighObs& obs) override;
  std::vector<int> act_low(const Env& env, std::span<const LowObs> obs) override;

 private:
  int fs_;
};

class RandomPolicy final : public Policy {
 public:
  explicit RandomPolicy(std::uint64_t seed) : rng_(seed) {}

  [[nodiscard]] std::string name() const override { return "random"; }
  int act_high(const Env& env, const HighObs& obs) override;
  std::vector<int> act_low(const Env& env, std::span<const LowObs> obs) override;

 private:
  Rng rng_;
};

/// Per-timestep brute force; the low-turn actions come from the same search
/// as the high-turn action.
class OptimalPolicy final : public Policy {
 public:
  explicit OptimalPolicy(OptimalCriterion criterion = OptimalCriterion::objective)
      : criterion_(criterion) {}

  [[nodiscard]] std::string name() const override { return "optimal"; }
  int act_high(const Env& env, const HighObs& obs) override;
  std::vector<int> act_low(const Env& env, std::span<const LowObs> obs) override;

  [[nodiscard]] const std::optional<OptimalChoice>& last_choice() const noexcept { return last_; }

 private:
  OptimalCriterion criterion_;
  std::optional<OptimalChoice> last_;
};

}  // namespace fsho
