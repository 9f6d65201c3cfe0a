#include <random>

#include "doctest.h"
#include "fsho/errors.hpp"
#include "fsho/split_model.hpp"

using namespace fsho;

TEST_SUITE("split_model") {

TEST_CASE("FS indices outside 1..7 are rejected, transitional limited to 1..4") {
  CHECK_THROWS_AS(FsOption(0), ActionError);
  CHECK_THROWS_AS(FsOption(8), ActionError);
  CHECK(FsOption(4).mc_capable_for_transitional());
  CHECK_FALSE(FsOption(5).mc_capable_for_transitional());
  CHECK_THROWS_AS(GroupAssignment(FsOption(5), {FsOption(3)}), ActionError);
  CHECK(to_string(GroupAssignment(FsOption(2), {FsOption(3), FsOption(7)})) == "F_t=2 F_nt=[3,7]");
}

TEST_CASE("shipped default table passes validation") {
  CHECK(validate_fs_table(default_fs_table()).empty());
}

TEST_CASE("midhaul increase between adjacent indices is reported") {
  auto t = default_fs_table();
  t.mutable_row(4).midhaul_per_ap = t.row(3).midhaul_per_ap + 1.0;
  const auto v = validate_fs_table(t);
  REQUIRE(v.size() == 1);
  CHECK(v[0].rule == "midhaul_non_increasing");
  CHECK(v[0].index_a == 3);
  CHECK(v[0].index_b == 4);
}

TEST_CASE("negative user GOPS is reported") {
  auto t = default_fs_table();
  t.mutable_row(1).user_gops_per_user = -1.0;
  bool found = false;
  for (const auto& v : validate_fs_table(t)) found = found || v.rule == "non_negative";
  CHECK(found);
}

TEST_CASE("make_fs_table rejects missing and duplicate rows") {
  std::vector<IndexedCostRow> rows;
  for (int i = 1; i <= 7; ++i) rows.push_back({i, default_fs_table().row(i)});
  CHECK(make_fs_table(rows) == default_fs_table());
  auto dup = rows;
  dup[6].index = 6;
  CHECK_THROWS_AS(make_fs_table(dup), SchemaError);
  auto missing = rows;
  missing.pop_back();
  CHECK_THROWS_AS(make_fs_table(missing), SchemaError);
  auto bad = rows;
  bad[0].index = 9;
  CHECK_THROWS_AS(make_fs_table(bad), SchemaError);
}

TEST_CASE("per-group GOPS") {
  auto t = default_fs_table();
  t.mutable_row(3).cell_gops_per_ap = 80.0;
  t.mutable_row(3).user_gops_per_user = 12.0;
  CHECK(gops_for_group(4, 6, FsOption(3), t) == 392.0);
  CHECK(gops_for_group(0, 0, FsOption(3), t) == 0.0);
  // doubling users doubles only the user term
  const double base = gops_for_group(4, 6, FsOption(3), t);
  const double doubled = gops_for_group(4, 12, FsOption(3), t);
  CHECK(doubled - base == 6 * 12.0);
}

TEST_CASE("EC total is the sum of both groups") {
  auto t = default_fs_table();
  t.mutable_row(3).cell_gops_per_ap = 80.0;
  t.mutable_row(3).user_gops_per_user = 12.0;
  t.mutable_row(2).cell_gops_per_ap = 50.0;
  t.mutable_row(2).user_gops_per_user = 30.0;
  // 392 + (4*50 + 5*30 = 350)
  const auto g = gops_total({4, 4, 5, 6}, FsOption(2), FsOption(3), t);
  CHECK(g.transitional == 350.0);
  CHECK(g.non_transitional == 392.0);
  CHECK(g.total == 742.0);

  // identical FS: 2 * n_aps * G_b + (n_t + n_nt) * G_u
  const auto same = gops_total({4, 4, 5, 6}, FsOption(3), FsOption(3), t);
  CHECK(same.total == 2 * 4 * 80.0 + 11 * 12.0);

  // no transitional users still pays that group's cell term
  const auto empty_t = gops_total({4, 4, 0, 6}, FsOption(3), FsOption(3), t);
  CHECK(empty_t.transitional == 4 * 80.0);
}

TEST_CASE("shared cell PFs charge the cell term once") {
  const auto t = default_fs_table();
  const EcLoad load{4, 4, 3, 7};
  const auto literal = gops_total(load, FsOption(4), FsOption(3), t, false);
  const auto shared = gops_total(load, FsOption(4), FsOption(3), t, true);
  const double smaller_cell = 4 * std::min(t.row(4).cell_gops_per_ap, t.row(3).cell_gops_per_ap);
  CHECK(literal.total - shared.total == doctest::Approx(smaller_cell));
}

TEST_CASE("midhaul per group and in total") {
  auto t = default_fs_table();
  t.mutable_row(3).midhaul_per_ap = 500.0;
  t.mutable_row(2).midhaul_per_ap = 800.0;
  CHECK(midhaul_for_group(4, FsOption(3), t) == 2000.0);
  CHECK(midhaul_for_group(0, FsOption(3), t) == 0.0);

  const GroupAssignment a(FsOption(2), {FsOption(3), FsOption(3)});
  const std::vector<int> aps{4, 4};
  CHECK(midhaul_total(a, aps, t) == 2 * (3200.0 + 2000.0));

  const GroupAssignment single(FsOption(2), {FsOption(3)});
  CHECK(midhaul_total(single, std::vector<int>{1}, t) == 800.0 + 500.0);
  CHECK_THROWS_AS(midhaul_total(single, aps, t), ConfigError);

  const GroupAssignment mixed(FsOption(1), {FsOption(3), FsOption(6)});
  const GroupAssignment swapped(FsOption(1), {FsOption(6), FsOption(3)});
  CHECK(midhaul_total(mixed, std::vector<int>{4, 2}, t) ==
        midhaul_total(swapped, std::vector<int>{2, 4}, t));
}

TEST_CASE("constraint boundary: equal is feasible, one above is not") {
  ResourceLedger ledger;
  EcLedgerEntry e;
  e.gops.total = 16000.0;
  ledger.ecs = {e, e};
  ledger.ecs[1].gops.total = 16001.0;
  const auto r = check_constraints(ledger, 16000.0, 60000.0);
  CHECK_FALSE(r.gops_violation[0]);
  CHECK(r.gops_violation[1]);
  CHECK_FALSE(r.midhaul_violation);
  CHECK(r.any());

  ResourceLedger at_limit;
  at_limit.ecs = {EcLedgerEntry{}};
  at_limit.midhaul_total = 60000.0;
  CHECK_FALSE(check_constraints(at_limit, 16000.0, 60000.0).any());
  at_limit.midhaul_total = 60000.5;
  CHECK(check_constraints(at_limit, 16000.0, 60000.0).midhaul_violation);
}

TEST_CASE("midhaul is independent of the user count") {
  const auto t = default_fs_table();
  for (int ft = 1; ft <= 4; ++ft) {
    for (int fnt = 1; fnt <= 7; ++fnt) {
      const GroupAssignment a(FsOption(ft), {FsOption(fnt), FsOption(fnt)});
      const double expected = midhaul_total(a, std::vector<int>{4, 4}, t);
      for (int users = 0; users <= 1000; users += 37) {
        const std::vector<EcLoad> loads{{4, 4, users, users}, {4, 4, users / 2, users + 1}};
        CHECK(compute_ledger(loads, a, t).midhaul_total == expected);
      }
    }
  }
}

}  // TEST_SUITE
