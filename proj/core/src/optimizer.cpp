#include "fsho/optimizer.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>

#include "fsho/errors.hpp"

namespace fsho {

PolicyKind PolicyKind::parse(const std::string& text) {
  if (text == "random") return {Tag::random, 0};
  if (text == "optimal") return {Tag::brute_force_optimal, 0};
  if (text == "hmarl") return {Tag::learned, 0};
  const std::string prefix = "static:";
  if (text.rfind(prefix, 0) == 0) {
    const auto rest = text.substr(prefix.size());
    int fs = 0;
    try {
      std::size_t used = 0;
      fs = std::stoi(rest, &used);
      if (used != rest.size()) throw std::invalid_argument(rest);
    } catch (const std::exception&) {
      throw ConfigError("policy: cannot parse FS index in '" + text + "'");
    }
    if (fs < 1 || fs > kNumFsOptions) {
      throw ConfigError("policy: static FS must be in 1..7, got " + std::to_string(fs));
    }
    return {Tag::static_fs, fs};
  }
  throw ConfigError("policy: unknown kind '" + text +
                    "' (expected hmarl, static:<f>, random or optimal)");
}

std::string PolicyKind::to_string() const {
  switch (tag) {
    case Tag::static_fs:
      return "static:" + std::to_string(fs);
    case Tag::random:
      return "random";
    case Tag::brute_force_optimal:
      return "optimal";
    case Tag::learned:
      return "hmarl";
  }
  return "?";
}

std::vector<GroupAssignment> enumerate_configs(int n_ecs) {
  if (n_ecs < 1) throw ConfigError("enumerate_configs: n_ecs must be >= 1");
  std::vector<GroupAssignment> out;
  std::vector<int> digits(static_cast<std::size_t>(n_ecs), 1);
  for (int ft = 1; ft <= kMaxTransitionalFs; ++ft) {
    std::fill(digits.begin(), digits.end(), 1);
    while (true) {
      std::vector<FsOption> nt;
      nt.reserve(digits.size());
      for (int d : digits) nt.emplace_back(d);
      out.emplace_back(FsOption(ft), std::move(nt));
      // odometer increment, last EC fastest
      int pos = n_ecs - 1;
      while (pos >= 0 && digits[static_cast<std::size_t>(pos)] == kNumFsOptions) {
        digits[static_cast<std::size_t>(pos)] = 1;
        --pos;
      }
      if (pos < 0) break;
      ++digits[static_cast<std::size_t>(pos)];
    }
  }
  return out;
}

OptimalChoice brute_force_optimal(const Env& env, OptimalCriterion criterion,
                                  std::optional<std::uint64_t> eval_seed) {
  const auto configs = enumerate_configs(static_cast<int>(env.topology().n_ecs()));
  std::optional<OptimalChoice> best;
  for (const auto& a : configs) {
    auto r = env.evaluate(a, eval_seed);
    const double v = criterion == OptimalCriterion::objective ? r.objective : r.high_reward;
    if (!best || v > best->value) {
      best = OptimalChoice{a, v, std::move(r)};
    }
  }
  return std::move(*best);
}

StaticActions static_policy_step(int fs, int n_ecs) {
  const FsOption option(fs);
  StaticActions out;
  out.high = std::min(option.index(), kMaxTransitionalFs);
  out.clamped = out.high != option.index();
  if (out.clamped) {
    spdlog::debug("static policy: FS {} cannot serve transitional users, CC action clamped to {}",
                  fs, out.high);
  }
  out.low.assign(static_cast<std::size_t>(n_ecs), option.index());
  return out;
}

StaticPolicy::StaticPolicy(int fs) : fs_(FsOption(fs).index()) {}

std::string StaticPolicy::name() const { return "static:" + std::to_string(fs_); }

int StaticPolicy::act_high(const Env& env, const HighObs&) {
  return static_policy_step(fs_, static_cast<int>(env.topology().n_ecs())).high;
}

std::vector<int> StaticPolicy::act_low(const Env& env, std::span<const LowObs>) {
  return static_policy_step(fs_, static_cast<int>(env.topology().n_ecs())).low;
}

int RandomPolicy::act_high(const Env&, const HighObs&) {
  return std::uniform_int_distribution<int>(1, kMaxTransitionalFs)(rng_);
}

std::vector<int> RandomPolicy::act_low(const Env&, std::span<const LowObs> obs) {
  std::uniform_int_distribution<int> pick(1, kNumFsOptions);
  std::vector<int> out;
  out.reserve(obs.size());
  for (std::size_t i = 0; i < obs.size(); ++i) out.push_back(pick(rng_));
  return out;
}

int OptimalPolicy::act_high(const Env& env, const HighObs&) {
  last_ = brute_force_optimal(env, criterion_);
  return last_->assignment.fs_transitional.index();
}

std::vector<int> OptimalPolicy::act_low(const Env& env, std::span<const LowObs>) {
  if (!last_) last_ = brute_force_optimal(env, criterion_);
  std::vector<int> out;
  for (const auto& f : last_->assignment.fs_non_transitional) out.push_back(f.index());
  return out;
}

}  // namespace fsho
