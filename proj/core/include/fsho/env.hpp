#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "fsho/qos.hpp"
#include "fsho/scenario.hpp"
#include "fsho/split_model.hpp"

namespace fsho {

inline constexpr int kHighObsDim = 3;
inline constexpr int kLowObsDim = 7;

/// Divisors applied to observations before they reach a policy. GOPS and
/// midhaul fields are always divided by G_th and M_th (so they read as
/// utilisation); the rest use the values below.
struct ObsScales {
  double n_users = 50.0;
  double delay_ms = 12.0;
  double ap_load = 10.0;
  double n_transitional = 50.0;
};

struct EnvConfig {
  int n_users = 50;
  int episode_len = 300;
  double d_th_ms = 12.0;
  double eps_k = 1e-5;
  double g_th = 16000.0;                  // GOPS per EC
  std::optional<double> m_th;             // Mbps, defaults to 30000 * n_ecs
  std::uint64_t seed = 1;
  double dt_s = 1.0;
  int k_min = 2;
  double omega_dc = 0.1;
  double omega_nt = 0.5;
  double omega_t = 0.5;
  bool share_cell_pfs = false;

  TopologyConfig topology;
  MobilityParams mobility;
  ChannelParams channel;
  DelayParams delay;
  FsConfigTable fs_table = default_fs_table();
  ObsScales scales;

  [[nodiscard]] int n_ecs() const noexcept { return topology.n_ecs; }
  [[nodiscard]] double midhaul_limit() const noexcept {
    return m_th.value_or(30000.0 * topology.n_ecs);
  }
  [[nodiscard]] ServiceSpec service() const { return {0, d_th_ms, eps_k}; }

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

/// CC agent view: (|T|, D_min, E[|B_T|]).
struct HighObs {
  double n_transitional = 0.0;
  double d_min_ms = 0.0;
  double mean_load_transitional = 0.0;

  [[nodiscard]] std::array<double, kHighObsDim> features(const EnvConfig& cfg) const;
};

/// EC agent view after the CC turn.
struct LowObs {
  int ec_id = 0;
  double n_users_ec = 0.0;
  double d_min_ms = 0.0;
  double mean_ap_load = 0.0;
  double gops_total = 0.0;
  double midhaul_ec = 0.0;
  double midhaul_total = 0.0;
  int a_cc = 0;

  [[nodiscard]] std::array<double, kLowObsDim> features(const EnvConfig& cfg) const;
};

/// Everything that follows from applying one assignment to the current
/// timestep. Produced identically by step_low and by evaluate.
struct TimestepResult {
  GroupAssignment assignment;
  ResourceLedger ledger_pre_drop;
  ViolationReport violations;  // pre-drop
  ResourceLedger ledger_post_drop;
  std::vector<int> dropped_ids;
  std::vector<int> dropped_per_ec;
  std::vector<int> users_per_ec;  // |U^e| before drops
  std::vector<double> low_rewards;
  double r_transitional = 1.0;
  double r_non_transitional = 1.0;
  double r_all = 1.0;
  double objective = 0.0;
  double high_reward = 0.0;
  int n_connected = 0;       // served after drops
  int n_disconnected = 0;
  int n_dropped = 0;
  int n_transitional = 0;    // all users whose cluster spans CCAs
  double mean_delay_ms = 0.0;  // over served users, 0 if none

  // per user, indexed by user id
  std::vector<double> delay_ms;       // NaN if not served
  std::vector<std::uint8_t> outage;
};

struct StepOutcome {
  TimestepResult result;
  int timestep = 0;  // the timestep this outcome belongs to
  bool done = false;
};

enum class Turn : std::uint8_t { high, low, finished };

/// Discrete-time soft-handover environment with the CC-then-ECs turn order.
/// Copyable: a copy is an independent snapshot used for what-if evaluation.
class Env {
 public:
  explicit Env(EnvConfig cfg);

  HighObs reset();
  HighObs reset(std::uint64_t seed);

  /// CC turn. Throws ProtocolError out of turn, ActionError if a_cc not in 1..4.
  std::vector<LowObs> step_high(int a_cc);

  /// EC turn, one FS index per EC. Throws ProtocolError out of turn,
  /// ActionError on an index outside 1..7 or a wrong action count.
  StepOutcome step_low(std::span<const int> actions);

  /// Outcome of an assignment at the current timestep without committing it.
  /// Uses the same drop randomness as step_low unless eval_seed is given.
  [[nodiscard]] TimestepResult evaluate(const GroupAssignment& assignment,
                                        std::optional<std::uint64_t> eval_seed = {}) const;

  [[nodiscard]] HighObs high_obs() const;
  [[nodiscard]] std::vector<LowObs> low_obs(int a_cc) const;

  [[nodiscard]] const EnvConfig& config() const noexcept { return cfg_; }
  [[nodiscard]] const NetworkTopology& topology() const noexcept { return topology_; }
  [[nodiscard]] const std::vector<UserState>& users() const noexcept { return users_; }
  [[nodiscard]] int timestep() const noexcept { return t_; }
  [[nodiscard]] Turn turn() const noexcept { return turn_; }
  [[nodiscard]] bool done() const noexcept { return turn_ == Turn::finished; }
  [[nodiscard]] std::optional<int> pending_high_action() const noexcept { return pending_a_cc_; }
  [[nodiscard]] std::uint64_t episode_seed() const noexcept { return seed_; }

 private:
  void recluster();
  [[nodiscard]] std::uint64_t drop_seed(std::optional<std::uint64_t> eval_seed) const noexcept;

  EnvConfig cfg_;
  NetworkTopology topology_;
  std::shared_ptr<const MobilityModel> mobility_;
  std::shared_ptr<const DelayModel> delay_model_;
  std::vector<UserState> users_;
  Rng mobility_rng_;
  std::uint64_t seed_ = 0;
  int t_ = 0;
  Turn turn_ = Turn::high;
  std::optional<int> pending_a_cc_;
};

/// Which ECs a cluster touches, ascending.
std::vector<int> ecs_of_cluster(std::span<const int> cluster, const NetworkTopology& topology);

/// Per-EC group loads for the given served users. A group with no users at
/// an EC is not deployed there and is charged nothing.
std::vector<EcLoad> ec_loads(std::span<const UserState> users, std::span<const std::uint8_t> served,
                             const NetworkTopology& topology);

/// Drops served users until every EC is within G_th and the midhaul within
/// M_th. GOPS overruns drop uniformly at random among that EC's users;
/// midhaul overruns drop round-robin across ECs. Returns dropped ids in
/// drop order; served is updated in place.
std::vector<int> apply_drop_policy(std::span<const UserState> users, std::vector<std::uint8_t>& served,
                                   const NetworkTopology& topology,
                                   const GroupAssignment& assignment, const FsConfigTable& table,
                                   double g_th, double m_th, bool share_cell_pfs, Rng& rng);

/// r_e over the EC's pre-drop users: share with delay strictly below d_th,
/// minus omega_dc per drop. Unserved users carry NaN and count as misses.
/// An EC with no users gets 0.
double compute_reward_low(std::span<const double> delays_ms, double d_th_ms, int n_dropped,
                          double omega_dc);

/// r_CC = R(T) + sum_e r_e.
double compute_reward_high(double r_transitional, std::span<const double> low_rewards);

}  // namespace fsho
