#include "fsho/env.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "fsho/errors.hpp"

namespace fsho {

namespace {

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Removes one served user from the per-EC loads; a group that loses its last
// user is no longer deployed at that EC.
void release_user(std::vector<EcLoad>& loads, const std::vector<int>& ecs, bool transitional) {
  for (int e : ecs) {
    auto& l = loads[static_cast<std::size_t>(e)];
    if (transitional) {
      if (--l.n_users_transitional == 0) l.n_aps_transitional = 0;
    } else {
      if (--l.n_users_non_transitional == 0) l.n_aps_non_transitional = 0;
    }
  }
}

}  // namespace

void EnvConfig::validate() const {
  require(n_users >= 0, "env.n_users must be >= 0");
  require(episode_len >= 1, "env.episode_len must be >= 1");
  require(d_th_ms > 0.0, "env.d_th_ms must be > 0");
  require(eps_k > 0.0 && eps_k < 1.0, "env.eps_k must be in (0,1)");
  require(g_th > 0.0, "env.g_th must be > 0");
  require(dt_s > 0.0, "env.dt_s must be > 0");
  require(k_min >= 2, "env.k_min must be >= 2");
  require(omega_dc >= 0.0, "env.omega_dc must be >= 0");
  require(omega_nt >= 0.0 && omega_t >= 0.0, "env.omega_nt/omega_t must be >= 0");
  require(topology.n_ecs >= 1, "env.n_ecs must be >= 1");
  require(topology.aps_per_ec >= 1, "env.aps_per_ec must be >= 1");
  require(midhaul_limit() > 0.0, "env.m_th must be > 0");
  require(topology.area.width > 0.0 && topology.area.height > 0.0,
          "env.area width/height must be > 0");
  require(topology.n_ecs * topology.aps_per_ec >= k_min,
          "env: fewer APs than the minimum cluster size k_min");
  require(mobility.v_min >= 0.0 && mobility.v_max >= mobility.v_min,
          "env.v_min/v_max must satisfy 0 <= v_min <= v_max");
  require(channel.d0_m > 0.0, "env.channel.d0_m must be > 0");
  require(scales.n_users > 0.0 && scales.delay_ms > 0.0 && scales.ap_load > 0.0 &&
              scales.n_transitional > 0.0,
          "env.obs_scale entries must be > 0");
  delay.validate();
  service().validate();
  const auto violations = validate_fs_table(fs_table);
  if (!violations.empty()) {
    std::string msg = "fs_table violates monotonicity/non-negativity:";
    for (const auto& v : violations) msg += "\n  " + v.message;
    throw ConfigError(msg);
  }
}

std::array<double, kHighObsDim> HighObs::features(const EnvConfig& cfg) const {
  return {n_transitional / cfg.scales.n_transitional, d_min_ms / cfg.scales.delay_ms,
          mean_load_transitional / cfg.scales.ap_load};
}

std::array<double, kLowObsDim> LowObs::features(const EnvConfig& cfg) const {
  return {n_users_ec / cfg.scales.n_users,
          d_min_ms / cfg.scales.delay_ms,
          mean_ap_load / cfg.scales.ap_load,
          gops_total / cfg.g_th,
          midhaul_ec / cfg.midhaul_limit(),
          midhaul_total / cfg.midhaul_limit(),
          static_cast<double>(a_cc) / kMaxTransitionalFs};
}

std::vector<int> ecs_of_cluster(std::span<const int> cluster, const NetworkTopology& topology) {
  std::vector<int> out;
  out.reserve(cluster.size());
  for (int ap : cluster) out.push_back(topology.ec_of(ap));
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<EcLoad> ec_loads(std::span<const UserState> users, std::span<const std::uint8_t> served,
                             const NetworkTopology& topology) {
  std::vector<EcLoad> loads(topology.n_ecs());
  for (std::size_t i = 0; i < users.size(); ++i) {
    if (!served[i]) continue;
    const auto& u = users[i];
    for (int e : ecs_of_cluster(u.cluster, topology)) {
      auto& l = loads[static_cast<std::size_t>(e)];
      if (u.transitional) {
        ++l.n_users_transitional;
      } else {
        ++l.n_users_non_transitional;
      }
    }
  }
  for (std::size_t e = 0; e < loads.size(); ++e) {
    const int n_aps = static_cast<int>(topology.ecs[e].ap_ids.size());
    if (loads[e].n_users_transitional > 0) loads[e].n_aps_transitional = n_aps;
    if (loads[e].n_users_non_transitional > 0) loads[e].n_aps_non_transitional = n_aps;
  }
  return loads;
}

std::vector<int> apply_drop_policy(std::span<const UserState> users, std::vector<std::uint8_t>& served,
                                   const NetworkTopology& topology,
                                   const GroupAssignment& assignment, const FsConfigTable& table,
                                   double g_th, double m_th, bool share_cell_pfs, Rng& rng) {
  std::vector<std::vector<int>> user_ecs(users.size());
  for (std::size_t i = 0; i < users.size(); ++i) {
    user_ecs[i] = ecs_of_cluster(users[i].cluster, topology);
  }
  auto loads = ec_loads(users, served, topology);
  std::vector<int> dropped;

  auto candidates_at = [&](int e) {
    std::vector<int> c;
    for (std::size_t i = 0; i < users.size(); ++i) {
      if (!served[i]) continue;
      if (std::binary_search(user_ecs[i].begin(), user_ecs[i].end(), e)) {
        c.push_back(static_cast<int>(i));
      }
    }
    return c;
  };
  auto drop_one_at = [&](int e) {
    auto c = candidates_at(e);
    if (c.empty()) return false;
    std::uniform_int_distribution<std::size_t> pick(0, c.size() - 1);
    const int i = c[pick(rng)];
    served[static_cast<std::size_t>(i)] = 0;
    release_user(loads, user_ecs[static_cast<std::size_t>(i)],
                 users[static_cast<std::size_t>(i)].transitional);
    dropped.push_back(users[static_cast<std::size_t>(i)].id);
    return true;
  };
  auto ec_gops = [&](int e) {
    return gops_total(loads[static_cast<std::size_t>(e)], assignment.fs_transitional,
                      assignment.fs_non_transitional[static_cast<std::size_t>(e)], table,
                      share_cell_pfs)
        .total;
  };

  const int n_ecs = static_cast<int>(topology.n_ecs());
  for (int e = 0; e < n_ecs; ++e) {
    while (ec_gops(e) > g_th) {
      if (!drop_one_at(e)) break;
    }
  }

  auto midhaul = [&] { return compute_ledger(loads, assignment, table, share_cell_pfs).midhaul_total; };
  int next_ec = 0;
  while (midhaul() > m_th) {
    bool any = false;
    for (int k = 0; k < n_ecs && !any; ++k) {
      const int e = (next_ec + k) % n_ecs;
      if (drop_one_at(e)) {
        any = true;
        next_ec = (e + 1) % n_ecs;
      }
    }
    if (!any) break;
  }
  return dropped;
}

double compute_reward_low(std::span<const double> delays_ms, double d_th_ms, int n_dropped,
                          double omega_dc) {
  if (delays_ms.empty()) return 0.0;
  const auto meeting = std::count_if(delays_ms.begin(), delays_ms.end(),
                                     [&](double d) { return d < d_th_ms; });  // NaN compares false
  return static_cast<double>(meeting) / static_cast<double>(delays_ms.size()) -
         static_cast<double>(n_dropped) * omega_dc;
}

double compute_reward_high(double r_transitional, std::span<const double> low_rewards) {
  double r = r_transitional;
  for (double x : low_rewards) r += x;
  return r;
}

Env::Env(EnvConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  topology_ = build_topology(cfg_.topology);
  mobility_ = std::make_shared<RandomWaypoint>(cfg_.mobility);
  delay_model_ = std::make_shared<LinearDelayModel>(cfg_.delay);
  reset();
}

HighObs Env::reset() { return reset(cfg_.seed); }

HighObs Env::reset(std::uint64_t seed) {
  seed_ = seed;
  mobility_rng_.seed(splitmix64(seed));
  users_.clear();
  users_.reserve(static_cast<std::size_t>(cfg_.n_users));
  for (int i = 0; i < cfg_.n_users; ++i) {
    UserState u;
    u.id = i;
    u.history = ReliabilityWindow(cfg_.delay.reliability_window);
    mobility_->place(u, topology_.area, mobility_rng_);
    users_.push_back(std::move(u));
  }
  t_ = 0;
  recluster();
  turn_ = Turn::high;
  pending_a_cc_.reset();
  return high_obs();
}

void Env::recluster() {
  for (auto& u : users_) {
    auto c = nearest_cluster(u, topology_, cfg_.k_min);
    u.cluster = std::move(c.ap_ids);
    u.transitional = classify_transitional(u.cluster, topology_);
    const double sinr =
        compute_sinr(u.position, topology_.aps[static_cast<std::size_t>(u.cluster.front())],
                     cfg_.channel);
    if (c.complete_reconfiguration || sinr < cfg_.channel.sinr_threshold_db) {
      u.status = UserStatus::disconnected;
    } else {
      u.status = UserStatus::connected;
    }
  }
}

HighObs Env::high_obs() const {
  HighObs obs;
  obs.d_min_ms = cfg_.d_th_ms;  // single service class
  std::vector<std::uint8_t> serves_transitional(topology_.n_aps(), 0);
  for (const auto& u : users_) {
    if (u.status != UserStatus::connected || !u.transitional) continue;
    obs.n_transitional += 1.0;
    for (int ap : u.cluster) serves_transitional[static_cast<std::size_t>(ap)] = 1;
  }
  const auto n_aps = std::count(serves_transitional.begin(), serves_transitional.end(), 1);
  if (n_aps > 0) {
    double links = 0.0;
    for (const auto& u : users_) {
      if (u.status != UserStatus::connected) continue;
      for (int ap : u.cluster) links += serves_transitional[static_cast<std::size_t>(ap)];
    }
    obs.mean_load_transitional = links / static_cast<double>(n_aps);
  }
  return obs;
}

std::vector<LowObs> Env::low_obs(int a_cc) const {
  std::vector<std::uint8_t> served(users_.size());
  for (std::size_t i = 0; i < users_.size(); ++i) {
    served[i] = users_[i].status == UserStatus::connected ? 1 : 0;
  }
  auto loads = ec_loads(users_, served, topology_);
  // Only the CC's choice is known at this point: charge the transitional
  // group and leave the non-transitional deployment to the EC.
  for (auto& l : loads) {
    l.n_aps_non_transitional = 0;
    l.n_users_non_transitional = 0;
  }
  GroupAssignment partial(FsOption(a_cc),
                          std::vector<FsOption>(topology_.n_ecs(), FsOption(1)));
  const auto ledger = compute_ledger(loads, partial, cfg_.fs_table, cfg_.share_cell_pfs);

  std::vector<LowObs> out;
  out.reserve(topology_.n_ecs());
  for (std::size_t e = 0; e < topology_.n_ecs(); ++e) {
    LowObs o;
    o.ec_id = static_cast<int>(e);
    o.d_min_ms = cfg_.d_th_ms;
    o.a_cc = a_cc;
    double links = 0.0;
    for (const auto& u : users_) {
      if (u.status != UserStatus::connected) continue;
      bool touches = false;
      for (int ap : u.cluster) {
        if (topology_.ec_of(ap) == static_cast<int>(e)) {
          links += 1.0;
          touches = true;
        }
      }
      if (touches) o.n_users_ec += 1.0;
    }
    o.mean_ap_load = links / static_cast<double>(topology_.ecs[e].ap_ids.size());
    o.gops_total = ledger.ecs[e].gops.total;
    o.midhaul_ec = ledger.ecs[e].midhaul();
    o.midhaul_total = ledger.midhaul_total;
    out.push_back(o);
  }
  return out;
}

std::vector<LowObs> Env::step_high(int a_cc) {
  if (turn_ != Turn::high) {
    throw ProtocolError(turn_ == Turn::finished ? "step_high: episode finished, call reset"
                                                : "step_high: expected the EC (low) turn");
  }
  if (a_cc < 1 || a_cc > kMaxTransitionalFs) {
    throw ActionError("step_high: transitional FS " + std::to_string(a_cc) +
                      " not in 1..4");
  }
  pending_a_cc_ = a_cc;
  turn_ = Turn::low;
  return low_obs(a_cc);
}

std::uint64_t Env::drop_seed(std::optional<std::uint64_t> eval_seed) const noexcept {
  const std::uint64_t base = eval_seed.value_or(seed_ ^ 0xd1b54a32d192ed03ULL);
  return splitmix64(base + static_cast<std::uint64_t>(t_) * 0x9e3779b97f4a7c15ULL);
}

TimestepResult Env::evaluate(const GroupAssignment& assignment,
                             std::optional<std::uint64_t> eval_seed) const {
  if (assignment.fs_non_transitional.size() != topology_.n_ecs()) {
    throw ActionError("evaluate: expected " + std::to_string(topology_.n_ecs()) +
                      " EC actions, got " +
                      std::to_string(assignment.fs_non_transitional.size()));
  }
  const auto n = users_.size();
  const auto n_ecs = topology_.n_ecs();
  const ServiceSpec spec = cfg_.service();

  TimestepResult r;
  r.assignment = assignment;

  std::vector<std::uint8_t> served(n);
  std::vector<std::vector<int>> user_ecs(n);
  r.users_per_ec.assign(n_ecs, 0);
  for (std::size_t i = 0; i < n; ++i) {
    served[i] = users_[i].status == UserStatus::connected ? 1 : 0;
    user_ecs[i] = ecs_of_cluster(users_[i].cluster, topology_);
    if (!served[i]) {
      ++r.n_disconnected;
      continue;
    }
    for (int e : user_ecs[i]) ++r.users_per_ec[static_cast<std::size_t>(e)];
  }
  const auto pre_served = served;

  auto loads = ec_loads(users_, served, topology_);
  r.ledger_pre_drop = compute_ledger(loads, assignment, cfg_.fs_table, cfg_.share_cell_pfs);
  r.violations = check_constraints(r.ledger_pre_drop, cfg_.g_th, cfg_.midhaul_limit());

  Rng drop_rng(drop_seed(eval_seed));
  r.dropped_ids = apply_drop_policy(users_, served, topology_, assignment, cfg_.fs_table,
                                    cfg_.g_th, cfg_.midhaul_limit(), cfg_.share_cell_pfs, drop_rng);
  r.n_dropped = static_cast<int>(r.dropped_ids.size());
  r.dropped_per_ec.assign(n_ecs, 0);
  for (int id : r.dropped_ids) {
    for (int e : user_ecs[static_cast<std::size_t>(id)]) ++r.dropped_per_ec[static_cast<std::size_t>(e)];
  }

  loads = ec_loads(users_, served, topology_);
  r.ledger_post_drop = compute_ledger(loads, assignment, cfg_.fs_table, cfg_.share_cell_pfs);

  r.delay_ms.assign(n, kNaN);
  r.outage.assign(n, 1);
  double delay_sum = 0.0;
  std::vector<double> eps_t;
  std::vector<double> eps_nt;
  std::vector<double> eps_all;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& u = users_[i];
    if (served[i]) {
      ++r.n_connected;
      double load_ratio = 0.0;
      for (int e : user_ecs[i]) {
        load_ratio = std::max(load_ratio,
                              r.ledger_post_drop.ecs[static_cast<std::size_t>(e)].gops.total / cfg_.g_th);
      }
      const FsOption fs = u.transitional
                              ? assignment.fs_transitional
                              : assignment.fs_non_transitional[static_cast<std::size_t>(user_ecs[i].front())];
      const double d = delay_model_->delay(cfg_.fs_table[fs], u.transitional, load_ratio).total_ms;
      r.delay_ms[i] = d;
      r.outage[i] = d > spec.delay_threshold_ms ? 1 : 0;
      delay_sum += d;
    }
    const double eps = u.history.preview(r.outage[i] != 0).epsilon;
    (u.transitional ? eps_t : eps_nt).push_back(eps);
    eps_all.push_back(eps);
    if (u.transitional) ++r.n_transitional;
  }
  r.mean_delay_ms = r.n_connected > 0 ? delay_sum / r.n_connected : 0.0;

  r.r_transitional = continuity_ratio(eps_t, spec.outage_threshold);
  r.r_non_transitional = continuity_ratio(eps_nt, spec.outage_threshold);
  r.r_all = continuity_ratio(eps_all, spec.outage_threshold);
  r.objective = objective_value(r.r_non_transitional, r.r_transitional, cfg_.omega_nt, cfg_.omega_t);

  r.low_rewards.assign(n_ecs, 0.0);
  std::vector<double> ec_delays;
  for (std::size_t e = 0; e < n_ecs; ++e) {
    ec_delays.clear();
    for (std::size_t i = 0; i < n; ++i) {
      if (!pre_served[i]) continue;
      if (!std::binary_search(user_ecs[i].begin(), user_ecs[i].end(), static_cast<int>(e))) continue;
      ec_delays.push_back(r.delay_ms[i]);
    }
    r.low_rewards[e] =
        compute_reward_low(ec_delays, spec.delay_threshold_ms, r.dropped_per_ec[e], cfg_.omega_dc);
  }
  r.high_reward = compute_reward_high(r.r_transitional, r.low_rewards);
  return r;
}

StepOutcome Env::step_low(std::span<const int> actions) {
  if (turn_ != Turn::low) {
    throw ProtocolError(turn_ == Turn::finished ? "step_low: episode finished, call reset"
                                                : "step_low: expected the CC (high) turn");
  }
  if (actions.size() != topology_.n_ecs()) {
    throw ActionError("step_low: expected " + std::to_string(topology_.n_ecs()) +
                      " EC actions, got " + std::to_string(actions.size()));
  }
  std::vector<FsOption> nt;
  nt.reserve(actions.size());
  for (int a : actions) nt.emplace_back(a);  // throws ActionError outside 1..7
  const GroupAssignment assignment(FsOption(*pending_a_cc_), std::move(nt));

  StepOutcome out;
  out.timestep = t_;
  out.result = evaluate(assignment);

  const ServiceSpec spec = cfg_.service();
  for (auto& u : users_) {
    const double d = out.result.delay_ms[static_cast<std::size_t>(u.id)];
    if (std::isnan(d)) {
      u.history.record_outage();
    } else {
      u.history.record_delay(d, spec);
    }
  }
  for (int id : out.result.dropped_ids) users_[static_cast<std::size_t>(id)].status = UserStatus::dropped;

  pending_a_cc_.reset();
  ++t_;
  if (t_ >= cfg_.episode_len) {
    turn_ = Turn::finished;
    out.done = true;
  } else {
    mobility_->step(users_, topology_.area, cfg_.dt_s, mobility_rng_);
    recluster();
    turn_ = Turn::high;
  }
  return out;
}

}  // namespace fsho
