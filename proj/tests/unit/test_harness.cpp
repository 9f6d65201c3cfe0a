#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "doctest.h"
#include "fsho/errors.hpp"
#include "fsho/harness.hpp"
#include "json.hpp"

using namespace fsho;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("fsho_harness_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

int data_rows(const fs::path& csv) {
  std::ifstream in(csv);
  std::string line;
  int rows = -1;  // header
  while (std::getline(in, line)) {
    if (!line.empty() && line.front() != '#') ++rows;
  }
  return rows;
}

ExperimentConfig quick(const std::string& policy, const fs::path& out, int episode_len = 40) {
  auto cfg = parse_config(R"({"env": {"episode_len": )" + std::to_string(episode_len) +
                          R"(}, "experiment": {"policy": ")" + policy + R"("}})");
  cfg.out_dir = out;
  return cfg;
}

}  // namespace

TEST_SUITE("harness") {

TEST_CASE("minimal config takes the documented defaults") {
  const auto cfg = parse_config("{}");
  CHECK(cfg.env.n_users == 50);
  CHECK(cfg.env.n_ecs() == 2);
  CHECK(cfg.env.episode_len == 300);
  CHECK(cfg.env.d_th_ms == 12.0);
  CHECK(cfg.env.eps_k == 1e-5);
  CHECK(cfg.env.g_th == 16000.0);
  CHECK(cfg.env.midhaul_limit() == 60000.0);
  CHECK(cfg.env.fs_table == default_fs_table());
  CHECK(cfg.train.high.gamma == 0.99);
  CHECK(cfg.train.low.gamma == 0.80);
  CHECK(cfg.episodes == 50);
}

TEST_CASE("a non-monotone FS table is rejected at load time") {
  nlohmann::json j;
  j["env"]["fs_table"] = nlohmann::json::array();
  for (int i = 1; i <= 7; ++i) {
    const auto& r = default_fs_table().row(i);
    j["env"]["fs_table"].push_back({{"index", i},
                                    {"cell_gops_per_ap", r.cell_gops_per_ap},
                                    {"user_gops_per_user", r.user_gops_per_user},
                                    {"midhaul_per_ap", i == 4 ? 99999.0 : r.midhaul_per_ap},
                                    {"proc_delay_ec_ms", r.proc_delay_ec_ms},
                                    {"proc_delay_cc_ms", r.proc_delay_cc_ms},
                                    {"tx_delay_midhaul_ms", r.tx_delay_midhaul_ms}});
  }
  CHECK_THROWS_WITH_AS(parse_config(j.dump()), doctest::Contains("non-increasing"), ConfigError);
  j["env"]["fs_table"].erase(6);
  CHECK_THROWS_WITH_AS(parse_config(j.dump()), doctest::Contains("missing row"), SchemaError);
}

TEST_CASE("strict parsing names unknown keys and bad types") {
  CHECK_THROWS_WITH_AS(parse_config(R"({"env": {"n_user": 3}})"), doctest::Contains("'n_user'"),
                       ConfigError);
  CHECK_THROWS_WITH_AS(parse_config(R"({"bogus": 1})"), doctest::Contains("'bogus'"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config(R"({"env": {"g_th": "lots"}})"), doctest::Contains("env.g_th"),
                       ConfigError);
  CHECK_THROWS_WITH_AS(parse_config(R"({"env": {"topology": {"n_ecs": 0}}})"),
                       doctest::Contains("n_ecs"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"experiment": {"seeds": []}})"), ConfigError);
  CHECK_THROWS_AS(parse_config("{not json"), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/config.json"), IoError);
}

TEST_CASE("effective config round-trips through JSON") {
  auto cfg = parse_config(R"({"env": {"g_th": 15000, "delay": {"load_knee": 0.9}},
                              "experiment": {"policy": "static:4", "seeds": [3, 4]}})");
  const auto again = parse_config(config_to_json(cfg));
  CHECK(config_hash(again) == config_hash(cfg));
  CHECK(again.env.g_th == 15000.0);
  CHECK(again.env.delay.load_knee == 0.9);
  CHECK(again.policy == PolicyKind::parse("static:4"));
  CHECK(config_hash(cfg).size() == 64);
}

TEST_CASE("sha256 known answer") {
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("empirical CDF") {
  const auto cdf = empirical_cdf(std::vector<double>{2.0, 1.0, 3.0});
  REQUIRE(cdf.size() == 3);
  CHECK(cdf[0] == std::pair{1.0, 1.0 / 3.0});
  CHECK(cdf[1] == std::pair{2.0, 2.0 / 3.0});
  CHECK(cdf[2] == std::pair{3.0, 1.0});

  const auto dup = empirical_cdf(std::vector<double>{1.0, 2.0, 2.0, 2.0});
  REQUIRE(dup.size() == 2);
  CHECK(dup[0].second == 0.25);
  CHECK(dup[1] == std::pair{2.0, 1.0});
  CHECK_THROWS_AS(empirical_cdf(std::vector<double>{}), ContractError);

  const auto dir = scratch("cdf");
  std::vector<double> values;
  Rng rng(3);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int i = 0; i < 500; ++i) values.push_back(n(rng));
  values.push_back(values[7]);
  export_cdf(dir / "cdf_x.csv", "x", values);
  const auto written = slurp(dir / "cdf_x.csv");
  CHECK(written.rfind("# schema=v1\nx,cdf\n", 0) == 0);
  const auto back = read_cdf(dir / "cdf_x.csv");
  CHECK(back == empirical_cdf(values));
  for (std::size_t i = 1; i < back.size(); ++i) CHECK(back[i].second > back[i - 1].second);
  CHECK(back.back().second == 1.0);
}

TEST_CASE("3 seeds x 5 episodes give 15 summary rows and a complete manifest") {
  const auto dir = scratch("rows");
  auto cfg = quick("static:3", dir);
  cfg.seeds = {1, 2, 3};
  cfg.episodes = 5;
  const auto r = run_experiment(cfg);
  CHECK(r.episodes.size() == 15);
  CHECK(data_rows(dir / "summary.csv") == 15);
  CHECK(data_rows(dir / "timeseries.csv") == 15 * 40);
  for (const auto& m : r.episodes) {
    CHECK(m.steps == 40);
    CHECK(m.gops_violation_steps <= m.steps);
    CHECK(m.dropped_ratio >= 0.0);
    CHECK(m.dropped_ratio <= 1.0);
  }
  for (const auto* name : {"summary.csv", "timeseries.csv", "cdf_dropped_pct.csv", "cdf_objective.csv"}) {
    CHECK(slurp(dir / name).rfind("# schema=v1\n", 0) == 0);
  }

  const auto manifest = nlohmann::json::parse(slurp(dir / "manifest.json"));
  CHECK(manifest["config_hash"] == config_hash(cfg));
  CHECK_FALSE(manifest["version"].get<std::string>().empty());
  std::set<std::string> listed;
  for (const auto& f : manifest["files"]) {
    listed.insert(f["path"].get<std::string>());
    CHECK(f["sha256"] == sha256_file(dir / f["path"].get<std::string>()));
  }
  for (const auto& entry : fs::directory_iterator(dir)) {
    const auto name = entry.path().filename().string();
    if (name != "manifest.json") CHECK(listed.contains(name));
  }
}

TEST_CASE("identical config and seed give byte-identical summaries") {
  const auto a = scratch("det_a");
  const auto b = scratch("det_b");
  for (const auto* policy : {"random", "static:4"}) {
    auto ca = quick(policy, a);
    auto cb = quick(policy, b);
    ca.seeds = cb.seeds = {5, 6};
    ca.episodes = cb.episodes = 2;
    run_experiment(ca);
    run_experiment(cb);
    CHECK(slurp(a / "summary.csv") == slurp(b / "summary.csv"));
    CHECK(slurp(a / "timeseries.csv") == slurp(b / "timeseries.csv"));
  }
}

TEST_CASE("optimal dominates the statics step by step when history does not matter") {
  // With a one-step reliability window the objective of a step depends only
  // on that step's assignment, so the greedy optimum is a per-step upper bound.
  auto base = parse_config(R"({"env": {"episode_len": 15, "delay": {"reliability_window": 1}}})");
  base.seeds = {2};
  base.episodes = 2;
  auto series = [&](const std::string& policy) {
    auto c = base;
    c.policy = PolicyKind::parse(policy);
    Env env(c.env);
    auto p = make_policy(c, 2);
    std::vector<StepRecord> steps;
    for (int ep = 0; ep < c.episodes; ++ep) run_episode(env, *p, 2, ep, &steps);
    return steps;
  };
  const auto opt = series("optimal");
  for (const auto* s : {"static:3", "static:4"}) {
    const auto st = series(s);
    REQUIRE(st.size() == opt.size());
    for (std::size_t i = 0; i < st.size(); ++i) CHECK(opt[i].objective >= st[i].objective);
  }
}

TEST_CASE("sweep writes one summary per point") {
  const auto dir = scratch("sweep");
  auto cfg = quick("static:3", dir, 20);
  cfg.episodes = 1;
  const SweepSpec spec{"g_th", {14000, 15000, 16000, 17000, 18000}};
  const auto points = run_sweep(cfg, spec);
  CHECK(points.size() == 5);
  for (double v : spec.values) {
    CHECK(fs::exists(dir / ("g_th_" + std::to_string(static_cast<int>(v))) / "summary.csv"));
  }
  CHECK(data_rows(dir / "sweep.csv") == 5);
  CHECK(fs::exists(dir / "manifest.json"));
  CHECK_THROWS_AS(run_sweep(cfg, SweepSpec{"m_th", {1.0}}), ConfigError);
}

TEST_CASE("write failures name the path") {
  const auto dir = scratch("io");
  std::ofstream(dir / "blocker") << "x";
  auto cfg = quick("static:3", dir / "blocker" / "sub", 5);
  cfg.episodes = 1;
  CHECK_THROWS_WITH_AS(run_experiment(cfg), doctest::Contains("blocker"), IoError);
}

TEST_CASE("train writes checkpoints, a curve and a manifest") {
  const auto dir = scratch("train");
  auto cfg = parse_config(R"({"env": {"n_users": 10, "episode_len": 10},
                              "train": {"iterations": 2, "episodes_per_iter": 1, "hidden": 8}})");
  cfg.out_dir = dir;
  const auto r = run_training(cfg);
  CHECK(r.curve.size() == 2);
  CHECK(fs::exists(dir / "checkpoint_2.bin"));
  CHECK(data_rows(dir / "train_curve.csv") == 2);
  const auto ck = hmarl::load_checkpoint(dir / "checkpoint_2.bin");
  CHECK(hmarl::flatten(ck.high) == hmarl::flatten(r.high));

  // a saved checkpoint drives the hmarl policy in simulate
  auto sim = quick("hmarl", scratch("train_sim"), 10);
  sim.checkpoint = dir / "checkpoint_2.bin";
  sim.episodes = 1;
  CHECK(run_experiment(sim).episodes.size() == 1);
}

}  // TEST_SUITE
