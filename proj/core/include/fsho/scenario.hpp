#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "fsho/qos.hpp"

namespace fsho {

using Rng = std::mt19937_64;

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Vec2&, const Vec2&) = default;
};

double distance(Vec2 a, Vec2 b) noexcept;

struct Area {
  double width = 1000.0;
  double height = 500.0;

  [[nodiscard]] bool contains(Vec2 p) const noexcept {
    return p.x >= 0.0 && p.x <= width && p.y >= 0.0 && p.y <= height;
  }
  [[nodiscard]] Vec2 clamp(Vec2 p) const noexcept;
};

struct AccessPoint {
  int id = 0;
  Vec2 position;
  int ec_id = 0;
  double tx_power_dbm = 30.0;
};

struct EdgeCloud {
  int id = 0;
  std::vector<int> ap_ids;
};

/// APs, their EC (CCA) ownership and the area they cover. The CC is implicit:
/// there is exactly one and every EC reaches it over the shared midhaul.
struct NetworkTopology {
  std::vector<EdgeCloud> ecs;
  std::vector<AccessPoint> aps;  // aps[i].id == i
  Area area;

  [[nodiscard]] std::size_t n_ecs() const noexcept { return ecs.size(); }
  [[nodiscard]] std::size_t n_aps() const noexcept { return aps.size(); }
  /// Throws TopologyError on an unknown AP id.
  [[nodiscard]] int ec_of(int ap_id) const;
  [[nodiscard]] std::vector<int> aps_per_ec() const;
};

struct TopologyConfig {
  int n_ecs = 2;
  int aps_per_ec = 4;
  Area area;
  double tx_power_dbm = 30.0;
};

/// ECs own equal vertical strips of the area, left to right by id; each
/// EC's APs sit at the cell centres of a near-square grid inside its strip.
NetworkTopology build_topology(const TopologyConfig& cfg);

enum class UserStatus : std::uint8_t { connected, disconnected, dropped };

const char* to_string(UserStatus s) noexcept;

struct UserState {
  int id = 0;
  Vec2 position;
  Vec2 waypoint;
  double speed = 0.0;  // m/s
  int service_id = 0;
  std::vector<int> cluster;  // serving AP ids, nearest first
  bool transitional = false;
  UserStatus status = UserStatus::connected;
  ReliabilityWindow history;
};

struct MobilityParams {
  double v_min = 5.0;
  double v_max = 20.0;
};

/// Interface for mobility models so other processes can be swapped in.
class MobilityModel {
 public:
  virtual ~MobilityModel() = default;
  virtual void place(UserState& user, const Area& area, Rng& rng) const = 0;
  virtual void step(std::span<UserState> users, const Area& area, double dt, Rng& rng) const = 0;
};

/// Random waypoint: straight line toward the waypoint at constant speed; a
/// fresh waypoint and speed are drawn once the user gets there.
class RandomWaypoint final : public MobilityModel {
 public:
  explicit RandomWaypoint(MobilityParams params = {}) : params_(params) {}

  void place(UserState& user, const Area& area, Rng& rng) const override;
  void step(std::span<UserState> users, const Area& area, double dt, Rng& rng) const override;

 private:
  MobilityParams params_;
};

void step_mobility(std::span<UserState> users, const Area& area, double dt,
                   const MobilityParams& params, Rng& rng);

struct ChannelParams {
  double pl0_db = 40.0;          // path loss at d0
  double d0_m = 1.0;
  double path_loss_exponent = 3.5;
  double noise_floor_dbm = -90.0;
  double interference_mw = 0.0;
  double sinr_threshold_db = -6.0;
};

/// Log-distance path loss; distances below d0 are clamped to d0.
double compute_sinr(Vec2 user, const AccessPoint& ap, const ChannelParams& params);

struct ClusterAssignment {
  int user_id = 0;
  std::vector<int> ap_ids;  // nearest first
  bool complete_reconfiguration = false;
};

/// k_min nearest APs per user, ties to the lower AP id. Throws ConfigError if
/// the topology has fewer than k_min APs or k_min < 2.
std::vector<ClusterAssignment> form_clusters(std::span<const UserState> users,
                                             const NetworkTopology& topology, int k_min);

ClusterAssignment nearest_cluster(const UserState& user, const NetworkTopology& topology,
                                  int k_min);

/// True when the cluster draws APs from at least two ECs.
bool classify_transitional(std::span<const int> cluster, const NetworkTopology& topology);

}  // namespace fsho
