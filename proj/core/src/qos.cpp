#include "fsho/qos.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "fsho/errors.hpp"

namespace fsho {

void ServiceSpec::validate() const {
  if (!(delay_threshold_ms > 0.0)) {
    throw ConfigError("service " + std::to_string(id) + ": delay threshold must be > 0");
  }
  if (!(outage_threshold > 0.0 && outage_threshold < 1.0)) {
    throw ConfigError("service " + std::to_string(id) + ": outage threshold must be in (0,1)");
  }
}

void DelayParams::validate() const {
  if (!(load_sensitivity >= 0.0)) throw ConfigError("delay.lambda must be >= 0");
  if (!(load_knee >= 0.0)) throw ConfigError("delay.u0 must be >= 0");
  if (!(transitional_route_factor >= 1.0)) throw ConfigError("delay.route_factor_t must be >= 1");
  if (!(hw_overhead_ms >= 0.0)) throw ConfigError("delay.hw_overhead_ms must be >= 0");
  if (reliability_window < 1) throw ConfigError("delay.window must be >= 1");
}

DelayBreakdown e2e_delay(const FsCostRow& row, bool transitional, double load_ratio,
                         const DelayParams& params) {
  const double route = transitional ? params.transitional_route_factor : 1.0;
  const double load_factor =
      1.0 + params.load_sensitivity * std::max(0.0, load_ratio - params.load_knee);
  DelayBreakdown d;
  d.tx_delay_ms = row.tx_delay_midhaul_ms * route;
  d.proc_delay_ms = (row.proc_delay_ec_ms + row.proc_delay_cc_ms) * load_factor;
  d.hw_overhead_ms = params.hw_overhead_ms;
  d.total_ms = d.tx_delay_ms + d.proc_delay_ms + d.hw_overhead_ms;
  return d;
}

DelayBreakdown LinearDelayModel::delay(const FsCostRow& row, bool transitional,
                                       double load_ratio) const {
  return e2e_delay(row, transitional, load_ratio, params_);
}

ReliabilityWindow::ReliabilityWindow(int capacity) {
  if (capacity < 1) throw ConfigError("reliability window must hold at least one timestep");
  delays_.assign(static_cast<std::size_t>(capacity), 0.0);
  outages_.assign(static_cast<std::size_t>(capacity), 0);
}

void ReliabilityWindow::push(double delay_ms, bool outage) {
  const auto slot = static_cast<std::size_t>(head_);
  if (size_ == capacity()) {
    outage_count_ -= outages_[slot];
  } else {
    ++size_;
  }
  delays_[slot] = delay_ms;
  outages_[slot] = outage ? 1 : 0;
  outage_count_ += outages_[slot];
  head_ = (head_ + 1) % capacity();
}

ReliabilityEstimate ReliabilityWindow::record_delay(double delay_ms, const ServiceSpec& spec) {
  push(delay_ms, delay_ms > spec.delay_threshold_ms);
  return estimate();
}

ReliabilityEstimate ReliabilityWindow::record_outage() {
  push(std::numeric_limits<double>::quiet_NaN(), true);
  return estimate();
}

ReliabilityEstimate ReliabilityWindow::estimate() const noexcept {
  ReliabilityEstimate r;
  r.window_size = size_;
  r.outage_count = outage_count_;
  r.epsilon = size_ == 0 ? 0.0 : static_cast<double>(outage_count_) / size_;
  r.rho = 1.0 - r.epsilon;
  return r;
}

ReliabilityEstimate ReliabilityWindow::preview(bool outage) const noexcept {
  int size = size_;
  int count = outage_count_;
  if (size == capacity()) {
    count -= outages_[static_cast<std::size_t>(head_)];
  } else {
    ++size;
  }
  count += outage ? 1 : 0;
  ReliabilityEstimate r;
  r.window_size = size;
  r.outage_count = count;
  r.epsilon = static_cast<double>(count) / size;
  r.rho = 1.0 - r.epsilon;
  return r;
}

double ReliabilityWindow::last_delay() const noexcept {
  if (size_ == 0) return std::numeric_limits<double>::quiet_NaN();
  const int last = (head_ + capacity() - 1) % capacity();
  return delays_[static_cast<std::size_t>(last)];
}

void ReliabilityWindow::clear() noexcept {
  head_ = 0;
  size_ = 0;
  outage_count_ = 0;
}

double continuity_ratio(std::span<const double> epsilons, double outage_threshold) {
  if (epsilons.empty()) return 1.0;
  const auto ok = std::count_if(epsilons.begin(), epsilons.end(),
                                [&](double e) { return e < outage_threshold; });
  return static_cast<double>(ok) / static_cast<double>(epsilons.size());
}

double continuity_ratio(std::span<const double> epsilons, std::span<const double> thresholds) {
  if (epsilons.size() != thresholds.size()) {
    throw ContractError("continuity_ratio: epsilon/threshold length mismatch");
  }
  if (epsilons.empty()) return 1.0;
  std::size_t ok = 0;
  for (std::size_t i = 0; i < epsilons.size(); ++i) {
    if (epsilons[i] < thresholds[i]) ++ok;
  }
  return static_cast<double>(ok) / static_cast<double>(epsilons.size());
}

double objective_value(double r_non_transitional, double r_transitional, double w_nt,
                       double w_t) {
  return w_nt * r_non_transitional + w_t * r_transitional;
}

}  // namespace fsho
