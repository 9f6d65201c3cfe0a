#include "fsho/split_model.hpp"

#include <algorithm>
#include <sstream>

#include "fsho/errors.hpp"

namespace fsho {

FsOption::FsOption(int index) : index_(index) {
  if (index < 1 || index > kNumFsOptions) {
    throw ActionError("FS index " + std::to_string(index) + " outside 1.." +
                      std::to_string(kNumFsOptions));
  }
}

FsConfigTable default_fs_table() {
  // Columns: G_b, G_u, M, proc EC, proc CC, tx midhaul.
  // Low indices push work to the CC: cheap at the EC, heavy on the midhaul,
  // slow end to end. Only FS 3 and 4 meet a 12 ms budget for transitional
  // users once the CC detour is added.
  return FsConfigTable({{
      {120.0, 30.0, 7000.0, 0.5, 9.0, 4.0},
      {300.0, 60.0, 4500.0, 2.0, 6.5, 3.5},
      {600.0, 325.0, 3000.0, 3.0, 3.0, 3.0},
      {640.0, 350.0, 2400.0, 4.0, 1.5, 2.5},
      {680.0, 380.0, 1500.0, 4.5, 1.0, 1.5},
      {720.0, 400.0, 800.0, 4.5, 0.5, 1.0},
      {760.0, 420.0, 200.0, 4.5, 0.0, 0.5},
  }});
}

FsConfigTable make_fs_table(std::span<const IndexedCostRow> rows) {
  std::array<FsCostRow, kNumFsOptions> out{};
  std::array<bool, kNumFsOptions> seen{};
  for (const auto& r : rows) {
    if (r.index < 1 || r.index > kNumFsOptions) {
      throw SchemaError("fs_table: index " + std::to_string(r.index) + " outside 1..7");
    }
    auto slot = static_cast<std::size_t>(r.index - 1);
    if (seen[slot]) {
      throw SchemaError("fs_table: duplicate row for index " + std::to_string(r.index));
    }
    seen[slot] = true;
    out[slot] = r.row;
  }
  for (int i = 0; i < kNumFsOptions; ++i) {
    if (!seen[static_cast<std::size_t>(i)]) {
      throw SchemaError("fs_table: missing row for index " + std::to_string(i + 1));
    }
  }
  return FsConfigTable(out);
}

std::vector<TableViolation> validate_fs_table(const FsConfigTable& table) {
  std::vector<TableViolation> out;
  const auto& rows = table.rows();

  struct Field {
    const char* name;
    double FsCostRow::*member;
  };
  static constexpr Field kFields[] = {
      {"cell_gops_per_ap", &FsCostRow::cell_gops_per_ap},
      {"user_gops_per_user", &FsCostRow::user_gops_per_user},
      {"midhaul_per_ap", &FsCostRow::midhaul_per_ap},
      {"proc_delay_ec", &FsCostRow::proc_delay_ec_ms},
      {"proc_delay_cc", &FsCostRow::proc_delay_cc_ms},
      {"tx_delay_midhaul", &FsCostRow::tx_delay_midhaul_ms},
  };

  for (int i = 1; i <= kNumFsOptions; ++i) {
    const auto& row = rows[static_cast<std::size_t>(i - 1)];
    for (const auto& f : kFields) {
      const double v = row.*(f.member);
      if (!(v >= 0.0)) {
        std::ostringstream msg;
        msg << f.name << " of FS " << i << " is " << v << ", must be >= 0";
        out.push_back({"non_negative", i, i, msg.str()});
      }
    }
  }

  for (int i = 1; i < kNumFsOptions; ++i) {
    const auto& lo = rows[static_cast<std::size_t>(i - 1)];
    const auto& hi = rows[static_cast<std::size_t>(i)];
    if (hi.gops_sum() < lo.gops_sum()) {
      std::ostringstream msg;
      msg << "G_b+G_u must be non-decreasing in FS index: FS " << i << " = " << lo.gops_sum()
          << " > FS " << i + 1 << " = " << hi.gops_sum();
      out.push_back({"gops_non_decreasing", i, i + 1, msg.str()});
    }
    if (hi.midhaul_per_ap > lo.midhaul_per_ap) {
      std::ostringstream msg;
      msg << "midhaul must be non-increasing in FS index: FS " << i << " = "
          << lo.midhaul_per_ap << " < FS " << i + 1 << " = " << hi.midhaul_per_ap;
      out.push_back({"midhaul_non_increasing", i, i + 1, msg.str()});
    }
    if (hi.delay_sum() > lo.delay_sum()) {
      std::ostringstream msg;
      msg << "delay must be non-increasing in FS index: FS " << i << " = " << lo.delay_sum()
          << " ms < FS " << i + 1 << " = " << hi.delay_sum() << " ms";
      out.push_back({"delay_non_increasing", i, i + 1, msg.str()});
    }
  }
  return out;
}

GroupAssignment::GroupAssignment(FsOption transitional, std::vector<FsOption> non_transitional)
    : fs_transitional(transitional), fs_non_transitional(std::move(non_transitional)) {
  if (!fs_transitional.mc_capable_for_transitional()) {
    throw ActionError("transitional FS " + std::to_string(fs_transitional.index()) +
                      " cannot carry multi-connectivity (allowed 1..4)");
  }
}

std::string to_string(const GroupAssignment& a) {
  std::string s = "F_t=" + std::to_string(a.fs_transitional.index()) + " F_nt=[";
  for (std::size_t e = 0; e < a.fs_non_transitional.size(); ++e) {
    if (e != 0) s += ',';
    s += std::to_string(a.fs_non_transitional[e].index());
  }
  return s + "]";
}

double gops_for_group(int n_aps, int n_users, FsOption fs, const FsConfigTable& table) {
  const auto& row = table[fs];
  return static_cast<double>(n_aps) * row.cell_gops_per_ap +
         static_cast<double>(n_users) * row.user_gops_per_user;
}

double midhaul_for_group(int n_aps, FsOption fs, const FsConfigTable& table) {
  return static_cast<double>(n_aps) * table[fs].midhaul_per_ap;
}

EcGops gops_total(const EcLoad& load, FsOption fs_t, FsOption fs_nt, const FsConfigTable& table,
                  bool share_cell_pfs) {
  EcGops g;
  g.transitional = gops_for_group(load.n_aps_transitional, load.n_users_transitional, fs_t, table);
  g.non_transitional =
      gops_for_group(load.n_aps_non_transitional, load.n_users_non_transitional, fs_nt, table);
  if (share_cell_pfs) {
    const double cell_t = load.n_aps_transitional * table[fs_t].cell_gops_per_ap;
    const double cell_nt = load.n_aps_non_transitional * table[fs_nt].cell_gops_per_ap;
    // The group with the larger cell cost carries the shared cell PFs.
    if (cell_t >= cell_nt) {
      g.non_transitional -= cell_nt;
    } else {
      g.transitional -= cell_t;
    }
  }
  g.total = g.transitional + g.non_transitional;
  return g;
}

double midhaul_total(const GroupAssignment& assignment, std::span<const int> aps_per_ec,
                     const FsConfigTable& table) {
  if (assignment.fs_non_transitional.size() != aps_per_ec.size()) {
    throw ConfigError("midhaul_total: assignment has " +
                      std::to_string(assignment.fs_non_transitional.size()) +
                      " EC entries, topology has " + std::to_string(aps_per_ec.size()));
  }
  double total = 0.0;
  for (std::size_t e = 0; e < aps_per_ec.size(); ++e) {
    total += midhaul_for_group(aps_per_ec[e], assignment.fs_transitional, table);
    total += midhaul_for_group(aps_per_ec[e], assignment.fs_non_transitional[e], table);
  }
  return total;
}

ResourceLedger compute_ledger(std::span<const EcLoad> loads, const GroupAssignment& assignment,
                              const FsConfigTable& table, bool share_cell_pfs) {
  if (assignment.fs_non_transitional.size() != loads.size()) {
    throw ConfigError("compute_ledger: assignment/EC count mismatch");
  }
  ResourceLedger ledger;
  ledger.ecs.reserve(loads.size());
  for (std::size_t e = 0; e < loads.size(); ++e) {
    const auto& load = loads[e];
    EcLedgerEntry entry;
    entry.gops = gops_total(load, assignment.fs_transitional, assignment.fs_non_transitional[e],
                            table, share_cell_pfs);
    entry.midhaul_transitional =
        midhaul_for_group(load.n_aps_transitional, assignment.fs_transitional, table);
    entry.midhaul_non_transitional =
        midhaul_for_group(load.n_aps_non_transitional, assignment.fs_non_transitional[e], table);
    ledger.midhaul_total += entry.midhaul();
    ledger.ecs.push_back(entry);
  }
  return ledger;
}

bool ViolationReport::any_gops() const noexcept {
  return std::any_of(gops_violation.begin(), gops_violation.end(), [](bool v) { return v; });
}

ViolationReport check_constraints(const ResourceLedger& ledger, double g_th, double m_th) {
  ViolationReport report;
  report.gops_violation.reserve(ledger.ecs.size());
  for (const auto& ec : ledger.ecs) {
    report.gops_violation.push_back(ec.gops.total > g_th);
  }
  report.midhaul_violation = ledger.midhaul_total > m_th;
  return report;
}

}  // namespace fsho
