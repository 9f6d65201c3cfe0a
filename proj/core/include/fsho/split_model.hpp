#pragma once

#include <array>
#include <compare>
#include <span>
#include <string>
#include <vector>

namespace fsho {

inline constexpr int kNumFsOptions = 7;
/// Highest FS index that still lets a transitional user keep multi-connectivity.
inline constexpr int kMaxTransitionalFs = 4;

/// A functional-split option, 1 (most centralized) .. 7 (most distributed).
class FsOption {
 public:
  /// Throws ActionError when index is outside 1..7.
  explicit FsOption(int index);

  [[nodiscard]] int index() const noexcept { return index_; }
  [[nodiscard]] bool mc_capable_for_transitional() const noexcept {
    return index_ <= kMaxTransitionalFs;
  }

  friend auto operator<=>(const FsOption&, const FsOption&) = default;

 private:
  int index_;
};

/// Resource and delay footprint of one FS option.
struct FsCostRow {
  double cell_gops_per_ap = 0.0;     // G_b(F), GOPS per AP
  double user_gops_per_user = 0.0;   // G_u(F), GOPS per user
  double midhaul_per_ap = 0.0;       // M(F), Mbps per AP
  double proc_delay_ec_ms = 0.0;
  double proc_delay_cc_ms = 0.0;
  double tx_delay_midhaul_ms = 0.0;

  [[nodiscard]] double gops_sum() const noexcept {
    return cell_gops_per_ap + user_gops_per_user;
  }
  [[nodiscard]] double delay_sum() const noexcept {
    return proc_delay_ec_ms + proc_delay_cc_ms + tx_delay_midhaul_ms;
  }

  friend bool operator==(const FsCostRow&, const FsCostRow&) = default;
};

class FsConfigTable {
 public:
  FsConfigTable() = default;
  explicit FsConfigTable(const std::array<FsCostRow, kNumFsOptions>& rows)
      : rows_(rows) {}

  [[nodiscard]] const FsCostRow& operator[](FsOption fs) const noexcept {
    return rows_[static_cast<std::size_t>(fs.index() - 1)];
  }
  [[nodiscard]] const FsCostRow& row(int index) const { return (*this)[FsOption(index)]; }
  FsCostRow& mutable_row(int index) {
    return rows_[static_cast<std::size_t>(FsOption(index).index() - 1)];
  }
  [[nodiscard]] const std::array<FsCostRow, kNumFsOptions>& rows() const noexcept {
    return rows_;
  }

  friend bool operator==(const FsConfigTable&, const FsConfigTable&) = default;

 private:
  std::array<FsCostRow, kNumFsOptions> rows_{};
};

/// Cost table shipped with the simulator. Passes validate_fs_table.
FsConfigTable default_fs_table();

/// A (row index, cost row) pair as read from a config file.
struct IndexedCostRow {
  int index = 0;
  FsCostRow row;
};

/// Assemble a table from loose rows. Throws SchemaError on a missing,
/// duplicated or out-of-range index.
FsConfigTable make_fs_table(std::span<const IndexedCostRow> rows);

struct TableViolation {
  std::string rule;  // "non_negative", "gops_non_decreasing", ...
  int index_a = 0;
  int index_b = 0;   // equal to index_a for single-row rules
  std::string message;
};

/// Every breached non-negativity or monotonicity rule, with the offending
/// pair of indices. Empty means the table is usable.
std::vector<TableViolation> validate_fs_table(const FsConfigTable& table);

/// F_t (network-wide) plus one F_nt per EC, indexed by EC id.
struct GroupAssignment {
  FsOption fs_transitional{3};
  std::vector<FsOption> fs_non_transitional;

  GroupAssignment() = default;
  /// Throws ActionError if transitional is not MC-capable.
  GroupAssignment(FsOption transitional, std::vector<FsOption> non_transitional);

  friend bool operator==(const GroupAssignment&, const GroupAssignment&) = default;
};

std::string to_string(const GroupAssignment& a);

/// G^{e,t}_x = n_aps * G_b(F_x) + n_users_x * G_u(F_x).
double gops_for_group(int n_aps, int n_users, FsOption fs, const FsConfigTable& table);

/// M^{e,t}_x = n_aps * M(F_x); user count does not enter.
double midhaul_for_group(int n_aps, FsOption fs, const FsConfigTable& table);

/// What one EC has to host for each user group this timestep. The AP counts
/// are per group so that an idle group (no users) can be charged nothing.
struct EcLoad {
  int n_aps_transitional = 0;
  int n_aps_non_transitional = 0;
  int n_users_transitional = 0;
  int n_users_non_transitional = 0;
};

struct EcGops {
  double transitional = 0.0;
  double non_transitional = 0.0;
  double total = 0.0;
};

/// G^{e,t}_tot as the sum over both groups. With share_cell_pfs the cell
/// term is charged once, at the larger of the two groups' cell costs.
EcGops gops_total(const EcLoad& load, FsOption fs_t, FsOption fs_nt,
                  const FsConfigTable& table, bool share_cell_pfs = false);

/// M^t_tot for a fixed topology: every EC hosts both groups on all its APs.
double midhaul_total(const GroupAssignment& assignment, std::span<const int> aps_per_ec,
                     const FsConfigTable& table);

struct EcLedgerEntry {
  EcGops gops;
  double midhaul_transitional = 0.0;
  double midhaul_non_transitional = 0.0;

  [[nodiscard]] double midhaul() const noexcept {
    return midhaul_transitional + midhaul_non_transitional;
  }
};

struct ResourceLedger {
  std::vector<EcLedgerEntry> ecs;
  double midhaul_total = 0.0;
};

ResourceLedger compute_ledger(std::span<const EcLoad> loads, const GroupAssignment& assignment,
                              const FsConfigTable& table, bool share_cell_pfs = false);

struct ViolationReport {
  std::vector<bool> gops_violation;  // per EC
  bool midhaul_violation = false;

  [[nodiscard]] bool any_gops() const noexcept;
  [[nodiscard]] bool any() const noexcept { return midhaul_violation || any_gops(); }
};

/// Over budget means strictly greater than the threshold.
ViolationReport check_constraints(const ResourceLedger& ledger, double g_th, double m_th);

}  // namespace fsho
