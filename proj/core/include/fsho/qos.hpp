#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "fsho/split_model.hpp"

namespace fsho {

struct ServiceSpec {
  int id = 0;
  double delay_threshold_ms = 12.0;  // D_th^k
  double outage_threshold = 1e-5;    // epsilon^k

  /// Throws ConfigError unless D_th > 0 and 0 < epsilon < 1.
  void validate() const;
};

struct DelayParams {
  double load_sensitivity = 1.0;       // lambda
  double load_knee = 0.85;              // u_0, utilisation where queueing kicks in
  double transitional_route_factor = 1.5;  // r_t, midhaul detour through the CC
  double hw_overhead_ms = 1.0;
  int reliability_window = 50;         // W

  void validate() const;
};

struct DelayBreakdown {
  double tx_delay_ms = 0.0;
  double proc_delay_ms = 0.0;
  double hw_overhead_ms = 0.0;
  double total_ms = 0.0;
};

/// Pluggable E2E delay model. Implementations must be pure.
class DelayModel {
 public:
  virtual ~DelayModel() = default;

  /// load_ratio is G^{e,t}_tot / G_th of the EC hosting the user (the most
  /// loaded one for transitional users).
  [[nodiscard]] virtual DelayBreakdown delay(const FsCostRow& row, bool transitional,
                                             double load_ratio) const = 0;
};

/// tx * route + (proc_ec + proc_cc) * (1 + lambda * max(0, load - u0)) + hw.
class LinearDelayModel final : public DelayModel {
 public:
  explicit LinearDelayModel(DelayParams params) : params_(params) {}

  [[nodiscard]] DelayBreakdown delay(const FsCostRow& row, bool transitional,
                                     double load_ratio) const override;

  [[nodiscard]] const DelayParams& params() const noexcept { return params_; }

 private:
  DelayParams params_;
};

DelayBreakdown e2e_delay(const FsCostRow& row, bool transitional, double load_ratio,
                         const DelayParams& params);

struct ReliabilityEstimate {
  int window_size = 0;
  int outage_count = 0;
  double epsilon = 0.0;  // epsilon_u
  double rho = 1.0;      // rho_u = 1 - epsilon_u
};

/// Sliding window of per-timestep outcomes for one user. A timestep is an
/// outage when the delay exceeds D_th or when the user was not served.
class ReliabilityWindow {
 public:
  explicit ReliabilityWindow(int capacity = 50);

  ReliabilityEstimate record_delay(double delay_ms, const ServiceSpec& spec);
  ReliabilityEstimate record_outage();

  [[nodiscard]] ReliabilityEstimate estimate() const noexcept;
  /// Estimate as it would be after recording one more timestep.
  [[nodiscard]] ReliabilityEstimate preview(bool outage) const noexcept;
  [[nodiscard]] int capacity() const noexcept { return static_cast<int>(delays_.size()); }
  [[nodiscard]] int size() const noexcept { return size_; }
  /// Most recent delay; NaN if the last timestep was an outage without delay.
  [[nodiscard]] double last_delay() const noexcept;
  void clear() noexcept;

 private:
  void push(double delay_ms, bool outage);

  std::vector<double> delays_;
  std::vector<std::uint8_t> outages_;
  int head_ = 0;
  int size_ = 0;
  int outage_count_ = 0;
};

/// R(Omega): share of users with epsilon_u strictly below their threshold.
/// An empty set yields 1.
double continuity_ratio(std::span<const double> epsilons, double outage_threshold);
double continuity_ratio(std::span<const double> epsilons, std::span<const double> thresholds);

/// omega_nt * R(U \ T) + omega_t * R(T).
double objective_value(double r_non_transitional, double r_transitional, double w_nt,
                       double w_t);

}  // namespace fsho
