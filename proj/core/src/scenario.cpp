#include "fsho/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "fsho/errors.hpp"

namespace fsho {

double distance(Vec2 a, Vec2 b) noexcept { return std::hypot(a.x - b.x, a.y - b.y); }

Vec2 Area::clamp(Vec2 p) const noexcept {
  return {std::clamp(p.x, 0.0, width), std::clamp(p.y, 0.0, height)};
}

int NetworkTopology::ec_of(int ap_id) const {
  if (ap_id < 0 || static_cast<std::size_t>(ap_id) >= aps.size()) {
    throw TopologyError("unknown AP id " + std::to_string(ap_id));
  }
  return aps[static_cast<std::size_t>(ap_id)].ec_id;
}

std::vector<int> NetworkTopology::aps_per_ec() const {
  std::vector<int> out;
  out.reserve(ecs.size());
  for (const auto& ec : ecs) out.push_back(static_cast<int>(ec.ap_ids.size()));
  return out;
}

NetworkTopology build_topology(const TopologyConfig& cfg) {
  if (cfg.n_ecs < 1) throw ConfigError("topology: n_ecs must be >= 1");
  if (cfg.aps_per_ec < 1) throw ConfigError("topology: aps_per_ec must be >= 1");
  if (!(cfg.area.width > 0.0) || !(cfg.area.height > 0.0)) {
    throw ConfigError("topology: area dimensions must be > 0");
  }

  NetworkTopology topo;
  topo.area = cfg.area;
  const double strip_w = cfg.area.width / cfg.n_ecs;
  const int k = cfg.aps_per_ec;
  const int cols = std::max(
      1, std::min(k, static_cast<int>(std::ceil(std::sqrt(k * strip_w / cfg.area.height)))));
  const int rows = (k + cols - 1) / cols;

  int next_ap = 0;
  for (int e = 0; e < cfg.n_ecs; ++e) {
    EdgeCloud ec{e, {}};
    const double x0 = e * strip_w;
    for (int i = 0; i < k; ++i) {
      const int c = i % cols;
      const int r = i / cols;
      AccessPoint ap;
      ap.id = next_ap++;
      ap.ec_id = e;
      ap.tx_power_dbm = cfg.tx_power_dbm;
      ap.position = {x0 + (c + 0.5) * strip_w / cols, (r + 0.5) * cfg.area.height / rows};
      ec.ap_ids.push_back(ap.id);
      topo.aps.push_back(ap);
    }
    topo.ecs.push_back(std::move(ec));
  }
  return topo;
}

const char* to_string(UserStatus s) noexcept {
  switch (s) {
    case UserStatus::connected:
      return "connected";
    case UserStatus::disconnected:
      return "disconnected";
    case UserStatus::dropped:
      return "dropped";
  }
  return "?";
}

namespace {

Vec2 uniform_point(const Area& area, Rng& rng) {
  std::uniform_real_distribution<double> ux(0.0, area.width);
  std::uniform_real_distribution<double> uy(0.0, area.height);
  const double x = ux(rng);
  const double y = uy(rng);
  return {x, y};
}

double uniform_speed(const MobilityParams& p, Rng& rng) {
  if (p.v_max <= p.v_min) return p.v_min;
  return std::uniform_real_distribution<double>(p.v_min, p.v_max)(rng);
}

}  // namespace

void RandomWaypoint::place(UserState& user, const Area& area, Rng& rng) const {
  user.position = uniform_point(area, rng);
  user.waypoint = uniform_point(area, rng);
  user.speed = uniform_speed(params_, rng);
}

void RandomWaypoint::step(std::span<UserState> users, const Area& area, double dt,
                          Rng& rng) const {
  for (auto& u : users) {
    const double travel = u.speed * dt;
    const double remaining = distance(u.position, u.waypoint);
    if (remaining <= travel) {
      u.position = u.waypoint;
      u.waypoint = uniform_point(area, rng);
      u.speed = uniform_speed(params_, rng);
    } else {
      const double f = travel / remaining;
      u.position.x += (u.waypoint.x - u.position.x) * f;
      u.position.y += (u.waypoint.y - u.position.y) * f;
    }
    u.position = area.clamp(u.position);
  }
}

void step_mobility(std::span<UserState> users, const Area& area, double dt,
                   const MobilityParams& params, Rng& rng) {
  RandomWaypoint(params).step(users, area, dt, rng);
}

double compute_sinr(Vec2 user, const AccessPoint& ap, const ChannelParams& params) {
  const double d = std::max(distance(user, ap.position), params.d0_m);
  const double path_loss = params.pl0_db + 10.0 * params.path_loss_exponent * std::log10(d / params.d0_m);
  double noise_dbm = params.noise_floor_dbm;
  if (params.interference_mw > 0.0) {
    noise_dbm = 10.0 * std::log10(std::pow(10.0, params.noise_floor_dbm / 10.0) +
                                  params.interference_mw);
  }
  return ap.tx_power_dbm - path_loss - noise_dbm;
}

ClusterAssignment nearest_cluster(const UserState& user, const NetworkTopology& topology,
                                  int k_min) {
  if (k_min < 2) throw ConfigError("cluster size k_min must be >= 2");
  if (topology.n_aps() < static_cast<std::size_t>(k_min)) {
    throw ConfigError("topology has " + std::to_string(topology.n_aps()) +
                      " APs, fewer than k_min = " + std::to_string(k_min));
  }
  std::vector<std::pair<double, int>> by_dist;
  by_dist.reserve(topology.n_aps());
  for (const auto& ap : topology.aps) {
    by_dist.emplace_back(distance(user.position, ap.position), ap.id);
  }
  const auto k = static_cast<std::ptrdiff_t>(k_min);
  std::partial_sort(by_dist.begin(), by_dist.begin() + k, by_dist.end());

  ClusterAssignment out;
  out.user_id = user.id;
  out.ap_ids.reserve(static_cast<std::size_t>(k_min));
  for (std::ptrdiff_t i = 0; i < k; ++i) out.ap_ids.push_back(by_dist[static_cast<std::size_t>(i)].second);

  if (!user.cluster.empty()) {
    const bool overlap = std::any_of(out.ap_ids.begin(), out.ap_ids.end(), [&](int id) {
      return std::find(user.cluster.begin(), user.cluster.end(), id) != user.cluster.end();
    });
    out.complete_reconfiguration = !overlap;
  }
  return out;
}

std::vector<ClusterAssignment> form_clusters(std::span<const UserState> users,
                                             const NetworkTopology& topology, int k_min) {
  std::vector<ClusterAssignment> out;
  out.reserve(users.size());
  for (const auto& u : users) out.push_back(nearest_cluster(u, topology, k_min));
  return out;
}

bool classify_transitional(std::span<const int> cluster, const NetworkTopology& topology) {
  if (cluster.empty()) throw TopologyError("classify_transitional: empty cluster");
  const int first = topology.ec_of(cluster.front());
  bool mixed = false;
  for (int ap : cluster) {
    if (topology.ec_of(ap) != first) mixed = true;
  }
  return mixed;
}

}  // namespace fsho
