#include "fsho/harness.hpp"

#include <openssl/evp.h>
#include <spdlog/fmt/fmt.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "fsho/errors.hpp"
#include "json.hpp"

#ifndef FSHO_VERSION_STRING
#define FSHO_VERSION_STRING "v0.0.0-unknown"
#endif

namespace fsho {

using nlohmann::json;
namespace fs = std::filesystem;

std::string version_string() { return FSHO_VERSION_STRING; }

// ---- config parsing ----

namespace {

/// Object reader that remembers which keys were consumed so leftovers can be
/// reported as unknown.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + " must be a JSON object");
  }

  [[nodiscard]] std::string where() const { return path_.empty() ? "config" : path_; }
  [[nodiscard]] std::string field(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  const json* find(const std::string& key) {
    used_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void read(const std::string& key, double& out) {
    if (const auto* v = find(key)) {
      if (!v->is_number()) throw ConfigError(field(key) + ": expected a number");
      out = v->get<double>();
      if (!std::isfinite(out)) throw ConfigError(field(key) + ": must be finite");
    }
  }
  void read(const std::string& key, int& out) {
    if (const auto* v = find(key)) {
      if (!v->is_number_integer()) throw ConfigError(field(key) + ": expected an integer");
      const auto x = v->get<std::int64_t>();
      if (x < INT32_MIN || x > INT32_MAX) throw ConfigError(field(key) + ": out of range");
      out = static_cast<int>(x);
    }
  }
  void read(const std::string& key, std::uint64_t& out) {
    if (const auto* v = find(key)) out = as_u64(*v, field(key));
  }
  void read(const std::string& key, bool& out) {
    if (const auto* v = find(key)) {
      if (!v->is_boolean()) throw ConfigError(field(key) + ": expected true/false");
      out = v->get<bool>();
    }
  }
  void read(const std::string& key, std::string& out) {
    if (const auto* v = find(key)) {
      if (!v->is_string()) throw ConfigError(field(key) + ": expected a string");
      out = v->get<std::string>();
    }
  }

  std::optional<Section> child(const std::string& key) {
    if (const auto* v = find(key)) return Section(*v, field(key));
    return std::nullopt;
  }

  void finish() const {
    std::vector<std::string> unknown;
    for (const auto& [k, _] : j_.items()) {
      if (!used_.contains(k)) unknown.push_back(k);
    }
    if (unknown.empty()) return;
    std::string msg = where() + ": unknown key(s):";
    for (const auto& k : unknown) msg += " '" + k + "'";
    throw ConfigError(msg);
  }

  static std::uint64_t as_u64(const json& v, const std::string& name) {
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer() && v.get<std::int64_t>() >= 0) {
      return static_cast<std::uint64_t>(v.get<std::int64_t>());
    }
    throw ConfigError(name + ": expected a non-negative integer");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

FsConfigTable parse_fs_table(const json& j, const std::string& name) {
  if (!j.is_array()) throw SchemaError(name + ": expected an array of rows");
  std::vector<IndexedCostRow> rows;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string row_name = name + "[" + std::to_string(i) + "]";
    Section s(j[i], row_name);
    auto required = [&](const std::string& key, double& out) {
      const auto* v = s.find(key);
      if (!v) throw SchemaError(s.field(key) + ": required");
      if (!v->is_number()) throw SchemaError(s.field(key) + ": expected a number");
      out = v->get<double>();
    };
    IndexedCostRow r;
    const auto* idx = s.find("index");
    if (!idx || !idx->is_number_integer()) throw SchemaError(s.field("index") + ": required integer");
    r.index = idx->get<int>();
    required("cell_gops_per_ap", r.row.cell_gops_per_ap);
    required("user_gops_per_user", r.row.user_gops_per_user);
    required("midhaul_per_ap", r.row.midhaul_per_ap);
    required("proc_delay_ec_ms", r.row.proc_delay_ec_ms);
    required("proc_delay_cc_ms", r.row.proc_delay_cc_ms);
    required("tx_delay_midhaul_ms", r.row.tx_delay_midhaul_ms);
    s.finish();
    rows.push_back(r);
  }
  return make_fs_table(rows);
}

void parse_ppo(Section s, hmarl::PpoConfig& p) {
  s.read("clip", p.clip);
  s.read("entropy_coef", p.entropy_coef);
  s.read("value_coef", p.value_coef);
  s.read("learning_rate", p.learning_rate);
  s.read("gamma", p.gamma);
  s.read("gae_lambda", p.gae_lambda);
  s.read("epochs", p.epochs);
  s.read("minibatch", p.minibatch);
  s.read("max_grad_norm", p.max_grad_norm);
  s.finish();
}

void parse_env(Section s, EnvConfig& e) {
  s.read("n_users", e.n_users);
  s.read("episode_len", e.episode_len);
  s.read("d_th_ms", e.d_th_ms);
  s.read("eps_k", e.eps_k);
  s.read("g_th", e.g_th);
  if (const auto* v = s.find("m_th"); v && !v->is_null()) {
    if (!v->is_number()) throw ConfigError(s.field("m_th") + ": expected a number or null");
    e.m_th = v->get<double>();
  }
  s.read("seed", e.seed);
  s.read("dt_s", e.dt_s);
  s.read("k_min", e.k_min);
  s.read("omega_dc", e.omega_dc);
  s.read("omega_nt", e.omega_nt);
  s.read("omega_t", e.omega_t);
  s.read("share_cell_pfs", e.share_cell_pfs);

  if (auto t = s.child("topology")) {
    t->read("n_ecs", e.topology.n_ecs);
    t->read("aps_per_ec", e.topology.aps_per_ec);
    t->read("area_width_m", e.topology.area.width);
    t->read("area_height_m", e.topology.area.height);
    t->read("tx_power_dbm", e.topology.tx_power_dbm);
    t->finish();
  }
  if (auto m = s.child("mobility")) {
    m->read("v_min", e.mobility.v_min);
    m->read("v_max", e.mobility.v_max);
    m->finish();
  }
  if (auto c = s.child("channel")) {
    c->read("pl0_db", e.channel.pl0_db);
    c->read("d0_m", e.channel.d0_m);
    c->read("path_loss_exponent", e.channel.path_loss_exponent);
    c->read("noise_floor_dbm", e.channel.noise_floor_dbm);
    c->read("interference_mw", e.channel.interference_mw);
    c->read("sinr_threshold_db", e.channel.sinr_threshold_db);
    c->finish();
  }
  if (auto d = s.child("delay")) {
    d->read("load_sensitivity", e.delay.load_sensitivity);
    d->read("load_knee", e.delay.load_knee);
    d->read("transitional_route_factor", e.delay.transitional_route_factor);
    d->read("hw_overhead_ms", e.delay.hw_overhead_ms);
    d->read("reliability_window", e.delay.reliability_window);
    d->finish();
  }
  if (auto o = s.child("obs_scales")) {
    o->read("n_users", e.scales.n_users);
    o->read("delay_ms", e.scales.delay_ms);
    o->read("ap_load", e.scales.ap_load);
    o->read("n_transitional", e.scales.n_transitional);
    o->finish();
  }
  if (const auto* t = s.find("fs_table")) e.fs_table = parse_fs_table(*t, s.field("fs_table"));
  s.finish();
}

void parse_train(Section s, hmarl::TrainConfig& t) {
  s.read("iterations", t.iterations);
  s.read("episodes_per_iter", t.episodes_per_iter);
  s.read("seed", t.seed);
  s.read("hidden", t.hidden);
  s.read("hidden_layers", t.hidden_layers);
  s.read("checkpoint_every", t.checkpoint_every);
  if (auto h = s.child("ppo_high")) parse_ppo(*h, t.high);
  if (auto l = s.child("ppo_low")) parse_ppo(*l, t.low);
  s.finish();
}

std::vector<double> number_list(const json& j, const std::string& name) {
  if (!j.is_array()) throw ConfigError(name + ": expected an array of numbers");
  std::vector<double> out;
  for (const auto& v : j) {
    if (!v.is_number()) throw ConfigError(name + ": expected an array of numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

void parse_experiment(Section s, ExperimentConfig& cfg, const fs::path& base_dir) {
  std::string policy = cfg.policy.to_string();
  s.read("policy", policy);
  cfg.policy = PolicyKind::parse(policy);
  s.read("episodes", cfg.episodes);
  if (const auto* v = s.find("seeds")) {
    if (!v->is_array()) throw ConfigError(s.field("seeds") + ": expected an array");
    cfg.seeds.clear();
    for (const auto& x : *v) cfg.seeds.push_back(Section::as_u64(x, s.field("seeds")));
  }
  std::string out_dir = cfg.out_dir.string();
  s.read("out_dir", out_dir);
  cfg.out_dir = fs::path(out_dir).is_absolute() ? fs::path(out_dir) : base_dir / out_dir;
  if (const auto* v = s.find("checkpoint"); v && !v->is_null()) {
    if (!v->is_string()) throw ConfigError(s.field("checkpoint") + ": expected a path string");
    const fs::path p = v->get<std::string>();
    cfg.checkpoint = p.is_absolute() ? p : base_dir / p;
  }
  if (auto w = s.child("sweep")) {
    SweepSpec spec;
    w->read("axis", spec.axis);
    if (const auto* v = w->find("values")) spec.values = number_list(*v, w->field("values"));
    w->finish();
    cfg.sweep = spec;
  }
  s.finish();
}

}  // namespace

void ExperimentConfig::validate() const {
  env.validate();
  train.validate();
  if (episodes < 1) throw ConfigError("experiment.episodes must be >= 1");
  if (seeds.empty()) throw ConfigError("experiment.seeds must not be empty");
  if (policy.tag == PolicyKind::Tag::static_fs && (policy.fs < 1 || policy.fs > kNumFsOptions)) {
    throw ConfigError("experiment.policy: static FS must be in 1..7");
  }
  if (checkpoint && !fs::exists(*checkpoint)) {
    throw ConfigError("experiment.checkpoint: file does not exist: " + checkpoint->string());
  }
  if (sweep) {
    if (sweep->axis != "g_th") {
      throw ConfigError("experiment.sweep.axis: only 'g_th' is supported, got '" + sweep->axis + "'");
    }
    for (double v : sweep->values) {
      if (!(v > 0.0)) throw ConfigError("experiment.sweep.values must be > 0");
    }
  }
}

ExperimentConfig parse_config(std::string_view json_text, const fs::path& base_dir) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  ExperimentConfig cfg;
  Section root(j, "");
  if (auto s = root.child("env")) parse_env(*s, cfg.env);
  if (auto s = root.child("train")) parse_train(*s, cfg.train);
  if (auto s = root.child("experiment")) parse_experiment(*s, cfg, base_dir);
  root.finish();
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config file: " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path.parent_path().empty() ? fs::path(".") : path.parent_path());
}

namespace {

json ppo_json(const hmarl::PpoConfig& p) {
  return {{"clip", p.clip},
          {"entropy_coef", p.entropy_coef},
          {"value_coef", p.value_coef},
          {"learning_rate", p.learning_rate},
          {"gamma", p.gamma},
          {"gae_lambda", p.gae_lambda},
          {"epochs", p.epochs},
          {"minibatch", p.minibatch},
          {"max_grad_norm", p.max_grad_norm}};
}

json config_json(const ExperimentConfig& cfg) {
  const auto& e = cfg.env;
  json table = json::array();
  for (int i = 1; i <= kNumFsOptions; ++i) {
    const auto& r = e.fs_table.row(i);
    table.push_back({{"index", i},
                     {"cell_gops_per_ap", r.cell_gops_per_ap},
                     {"user_gops_per_user", r.user_gops_per_user},
                     {"midhaul_per_ap", r.midhaul_per_ap},
                     {"proc_delay_ec_ms", r.proc_delay_ec_ms},
                     {"proc_delay_cc_ms", r.proc_delay_cc_ms},
                     {"tx_delay_midhaul_ms", r.tx_delay_midhaul_ms}});
  }
  json env = {
      {"n_users", e.n_users},
      {"episode_len", e.episode_len},
      {"d_th_ms", e.d_th_ms},
      {"eps_k", e.eps_k},
      {"g_th", e.g_th},
      {"m_th", e.midhaul_limit()},
      {"seed", e.seed},
      {"dt_s", e.dt_s},
      {"k_min", e.k_min},
      {"omega_dc", e.omega_dc},
      {"omega_nt", e.omega_nt},
      {"omega_t", e.omega_t},
      {"share_cell_pfs", e.share_cell_pfs},
      {"topology",
       {{"n_ecs", e.topology.n_ecs},
        {"aps_per_ec", e.topology.aps_per_ec},
        {"area_width_m", e.topology.area.width},
        {"area_height_m", e.topology.area.height},
        {"tx_power_dbm", e.topology.tx_power_dbm}}},
      {"mobility", {{"v_min", e.mobility.v_min}, {"v_max", e.mobility.v_max}}},
      {"channel",
       {{"pl0_db", e.channel.pl0_db},
        {"d0_m", e.channel.d0_m},
        {"path_loss_exponent", e.channel.path_loss_exponent},
        {"noise_floor_dbm", e.channel.noise_floor_dbm},
        {"interference_mw", e.channel.interference_mw},
        {"sinr_threshold_db", e.channel.sinr_threshold_db}}},
      {"delay",
       {{"load_sensitivity", e.delay.load_sensitivity},
        {"load_knee", e.delay.load_knee},
        {"transitional_route_factor", e.delay.transitional_route_factor},
        {"hw_overhead_ms", e.delay.hw_overhead_ms},
        {"reliability_window", e.delay.reliability_window}}},
      {"obs_scales",
       {{"n_users", e.scales.n_users},
        {"delay_ms", e.scales.delay_ms},
        {"ap_load", e.scales.ap_load},
        {"n_transitional", e.scales.n_transitional}}},
      {"fs_table", table},
  };
  const auto& t = cfg.train;
  json train = {{"iterations", t.iterations},
                {"episodes_per_iter", t.episodes_per_iter},
                {"seed", t.seed},
                {"hidden", t.hidden},
                {"hidden_layers", t.hidden_layers},
                {"checkpoint_every", t.checkpoint_every},
                {"ppo_high", ppo_json(t.high)},
                {"ppo_low", ppo_json(t.low)}};
  json experiment = {{"policy", cfg.policy.to_string()},
                     {"episodes", cfg.episodes},
                     {"seeds", cfg.seeds},
                     {"out_dir", cfg.out_dir.generic_string()},
                     {"checkpoint", cfg.checkpoint ? json(cfg.checkpoint->generic_string()) : json()}};
  if (cfg.sweep) experiment["sweep"] = {{"axis", cfg.sweep->axis}, {"values", cfg.sweep->values}};
  return {{"env", env}, {"train", train}, {"experiment", experiment}};
}

}  // namespace

std::string config_to_json(const ExperimentConfig& cfg) { return config_json(cfg).dump(2); }

std::string config_hash(const ExperimentConfig& cfg) {
  // The output location does not change results, so it stays out of the hash.
  json j = config_json(cfg);
  j["experiment"].erase("out_dir");
  return sha256_hex(j.dump());
}

// ---- hashing ----

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 computation failed");
  }
  std::string hex;
  hex.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", digest[i]);
  return hex;
}

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return sha256_hex(buf.str());
}

// ---- running ----

std::uint64_t episode_seed(std::uint64_t seed, int episode) {
  std::uint64_t x = seed * 0x9e3779b97f4a7c15ULL + static_cast<std::uint64_t>(episode) + 1;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

EpisodeMetrics run_episode(Env& env, Policy& policy, std::uint64_t seed, int episode,
                           std::vector<StepRecord>* steps) {
  EpisodeMetrics m;
  m.episode = episode;
  m.seed = seed;
  env.reset(episode_seed(seed, episode));
  long dropped = 0;
  while (!env.done()) {
    const auto out = run_timestep(env, policy);
    const auto& r = out.result;
    ++m.steps;
    if (r.violations.any_gops()) ++m.gops_violation_steps;
    if (r.violations.midhaul_violation) ++m.midhaul_violation_steps;
    dropped += r.n_dropped;
    m.r_transitional += r.r_transitional;
    m.r_non_transitional += r.r_non_transitional;
    m.mean_objective += r.objective;
    m.mean_r_cc += r.high_reward;
    if (steps) {
      StepRecord s;
      s.seed = seed;
      s.episode = episode;
      s.t = out.timestep;
      s.assignment = r.assignment;
      s.gops_violation = r.violations.any_gops();
      s.midhaul_violation = r.violations.midhaul_violation;
      s.n_transitional = r.n_transitional;
      s.n_connected = r.n_connected;
      s.n_disconnected = r.n_disconnected;
      s.n_dropped = r.n_dropped;
      s.r_transitional = r.r_transitional;
      s.r_non_transitional = r.r_non_transitional;
      s.objective = r.objective;
      s.r_cc = r.high_reward;
      s.mean_delay_ms = r.mean_delay_ms;
      steps->push_back(std::move(s));
    }
  }
  if (m.steps > 0) {
    const double n = m.steps;
    m.r_transitional /= n;
    m.r_non_transitional /= n;
    m.mean_objective /= n;
    m.mean_r_cc /= n;
    const int users = env.config().n_users;
    m.dropped_ratio = users > 0 ? static_cast<double>(dropped) / (n * users) : 0.0;
  }
  return m;
}

std::unique_ptr<Policy> make_policy(const ExperimentConfig& cfg, std::uint64_t seed,
                                    TrainedPolicies* trained) {
  switch (cfg.policy.tag) {
    case PolicyKind::Tag::static_fs:
      return std::make_unique<StaticPolicy>(cfg.policy.fs);
    case PolicyKind::Tag::random:
      return std::make_unique<RandomPolicy>(episode_seed(seed, -1));
    case PolicyKind::Tag::brute_force_optimal:
      return std::make_unique<OptimalPolicy>();
    case PolicyKind::Tag::learned:
      break;
  }
  if (cfg.checkpoint) {
    auto c = hmarl::load_checkpoint(*cfg.checkpoint);
    return std::make_unique<hmarl::HmarlPolicy>(std::move(c.high), std::move(c.low));
  }
  if (trained) {
    if (const auto it = trained->find(seed); it != trained->end()) {
      return std::make_unique<hmarl::HmarlPolicy>(it->second.high, it->second.low);
    }
  }
  auto tc = cfg.train;
  tc.seed = seed;
  tc.checkpoint_dir.reset();
  spdlog::info("training hmarl for seed {} ({} iterations)", seed, tc.iterations);
  auto r = hmarl::train(cfg.env, tc);
  if (trained) trained->insert_or_assign(seed, hmarl::Checkpoint{tc.iterations, r.high, r.low});
  return std::make_unique<hmarl::HmarlPolicy>(std::move(r.high), std::move(r.low));
}

namespace {

std::vector<EpisodeMetrics> run_all(const ExperimentConfig& cfg, TrainedPolicies* trained,
                                    std::vector<StepRecord>* steps) {
  std::vector<EpisodeMetrics> out;
  Env env(cfg.env);
  for (const auto seed : cfg.seeds) {
    auto policy = make_policy(cfg, seed, trained);
    for (int ep = 0; ep < cfg.episodes; ++ep) {
      out.push_back(run_episode(env, *policy, seed, ep, steps));
      const auto& m = out.back();
      spdlog::debug("{} seed {} episode {}: objective {:.4f} gops_viol {:.3f}", policy->name(),
                    seed, ep, m.mean_objective, m.gops_violation_ratio());
    }
  }
  return out;
}

std::ofstream open_csv(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "# schema=v1\n";
  return out;
}

void close_checked(std::ofstream& out, const fs::path& path) {
  out.flush();
  if (!out) throw IoError("write failed: " + path.string());
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

}  // namespace

std::vector<EpisodeMetrics> evaluate_policy(const ExperimentConfig& cfg, TrainedPolicies* trained) {
  return run_all(cfg, trained, nullptr);
}

void write_summary_csv(const fs::path& path, std::span<const EpisodeMetrics> rows) {
  auto out = open_csv(path);
  out << "seed,episode,steps,gops_violation_steps,midhaul_violation_steps,gops_violation_ratio,"
         "dropped_ratio,r_transitional,r_non_transitional,mean_objective,mean_r_cc\n";
  for (const auto& m : rows) {
    out << fmt::format("{},{},{},{},{},{},{},{},{},{},{}\n", m.seed, m.episode, m.steps,
                       m.gops_violation_steps, m.midhaul_violation_steps, m.gops_violation_ratio(),
                       m.dropped_ratio, m.r_transitional, m.r_non_transitional, m.mean_objective,
                       m.mean_r_cc);
  }
  close_checked(out, path);
}

void write_timeseries_csv(const fs::path& path, std::span<const StepRecord> rows, int n_ecs) {
  auto out = open_csv(path);
  out << "seed,episode,t,f_t";
  for (int e = 0; e < n_ecs; ++e) out << ",f_nt_" << e;
  out << ",gops_violation,midhaul_violation,n_transitional,n_connected,n_disconnected,n_dropped,"
         "r_transitional,r_non_transitional,objective,r_cc,mean_delay_ms\n";
  for (const auto& s : rows) {
    out << s.seed << ',' << s.episode << ',' << s.t << ',' << s.assignment.fs_transitional.index();
    for (const auto& f : s.assignment.fs_non_transitional) out << ',' << f.index();
    out << fmt::format(",{},{},{},{},{},{},{},{},{},{},{}\n", int{s.gops_violation},
                       int{s.midhaul_violation}, s.n_transitional, s.n_connected, s.n_disconnected,
                       s.n_dropped, s.r_transitional, s.r_non_transitional, s.objective, s.r_cc,
                       s.mean_delay_ms);
  }
  close_checked(out, path);
}

std::vector<std::pair<double, double>> empirical_cdf(std::span<const double> values) {
  if (values.empty()) throw ContractError("empirical_cdf: no values");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  std::vector<std::pair<double, double>> out;
  const double n = static_cast<double>(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i + 1 < v.size() && v[i + 1] == v[i]) continue;
    out.emplace_back(v[i], static_cast<double>(i + 1) / n);
  }
  return out;
}

void export_cdf(const fs::path& path, std::string_view metric, std::span<const double> values) {
  const auto cdf = empirical_cdf(values);
  auto out = open_csv(path);
  out << metric << ",cdf\n";
  for (const auto& [x, p] : cdf) out << fmt::format("{},{}\n", x, p);
  close_checked(out, path);
}

std::vector<std::pair<double, double>> read_cdf(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::vector<std::pair<double, double>> out;
  std::string line;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.empty() || line.front() == '#') continue;
    if (!header) {
      header = true;
      continue;
    }
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw SchemaError("malformed CDF row in " + path.string());
    out.emplace_back(std::stod(line.substr(0, comma)), std::stod(line.substr(comma + 1)));
  }
  return out;
}

void write_manifest(const fs::path& dir, const ExperimentConfig& cfg, std::string_view command,
                    std::span<const fs::path> files) {
  json listed = json::array();
  for (const auto& f : files) {
    listed.push_back({{"path", f.lexically_relative(dir).generic_string()},
                      {"sha256", sha256_file(f)},
                      {"bytes", fs::file_size(f)}});
  }
  const json manifest = {{"schema", "v1"},
                         {"version", version_string()},
                         {"command", std::string(command)},
                         {"config_hash", config_hash(cfg)},
                         {"config", config_json(cfg)},
                         {"files", listed}};
  const auto path = dir / "manifest.json";
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << manifest.dump(2) << '\n';
  close_checked(out, path);
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, TrainedPolicies* trained) {
  ensure_dir(cfg.out_dir);
  std::vector<StepRecord> steps;
  ExperimentResult res;
  res.episodes = run_all(cfg, trained, &steps);

  const auto summary = cfg.out_dir / "summary.csv";
  const auto timeseries = cfg.out_dir / "timeseries.csv";
  const auto cdf_dropped = cfg.out_dir / "cdf_dropped_pct.csv";
  const auto cdf_objective = cfg.out_dir / "cdf_objective.csv";
  write_summary_csv(summary, res.episodes);
  write_timeseries_csv(timeseries, steps, cfg.env.n_ecs());

  const double users = std::max(1, cfg.env.n_users);
  std::vector<double> dropped_pct;
  dropped_pct.reserve(steps.size());
  for (const auto& s : steps) dropped_pct.push_back(100.0 * s.n_dropped / users);
  export_cdf(cdf_dropped, "dropped_pct", dropped_pct);
  std::vector<double> objectives;
  for (const auto& m : res.episodes) objectives.push_back(m.mean_objective);
  export_cdf(cdf_objective, "mean_objective", objectives);

  res.files = {summary, timeseries, cdf_dropped, cdf_objective};
  write_manifest(cfg.out_dir, cfg, "simulate", res.files);
  spdlog::info("{}: {} episodes written to {}", cfg.policy.to_string(), res.episodes.size(),
               cfg.out_dir.string());
  return res;
}

std::vector<SweepPoint> run_sweep(const ExperimentConfig& cfg, const SweepSpec& sweep,
                                  bool write_files, TrainedPolicies* trained) {
  if (sweep.axis != "g_th") {
    throw ConfigError("sweep axis '" + sweep.axis + "' not supported (only g_th)");
  }
  if (sweep.values.empty()) throw ConfigError("sweep: no values given");
  TrainedPolicies local;
  if (!trained) trained = &local;
  if (cfg.policy.tag == PolicyKind::Tag::learned && !cfg.checkpoint) {
    for (const auto seed : cfg.seeds) make_policy(cfg, seed, trained);
  }

  std::vector<SweepPoint> points;
  std::vector<fs::path> files;
  for (const double v : sweep.values) {
    ExperimentConfig point = cfg;
    point.env.g_th = v;
    point.env.validate();
    point.out_dir = cfg.out_dir / fmt::format("g_th_{}", v);
    SweepPoint p;
    p.value = v;
    if (write_files) {
      auto r = run_experiment(point, trained);
      p.episodes = std::move(r.episodes);
      for (const auto& f : r.files) files.push_back(f);
      files.push_back(point.out_dir / "manifest.json");
    } else {
      p.episodes = evaluate_policy(point, trained);
    }
    const double n = static_cast<double>(p.episodes.size());
    for (const auto& m : p.episodes) {
      p.mean_objective += m.mean_objective / n;
      p.mean_r_transitional += m.r_transitional / n;
      p.mean_r_non_transitional += m.r_non_transitional / n;
      p.gops_violation_ratio += m.gops_violation_ratio() / n;
      p.dropped_ratio += m.dropped_ratio / n;
    }
    spdlog::info("sweep g_th={} {}: objective {:.4f}", v, cfg.policy.to_string(), p.mean_objective);
    points.push_back(std::move(p));
  }

  if (write_files) {
    const auto path = cfg.out_dir / "sweep.csv";
    auto out = open_csv(path);
    out << "g_th,policy,episodes,mean_objective,r_transitional,r_non_transitional,"
           "gops_violation_ratio,dropped_ratio\n";
    for (const auto& p : points) {
      out << fmt::format("{},{},{},{},{},{},{},{}\n", p.value, cfg.policy.to_string(),
                         p.episodes.size(), p.mean_objective, p.mean_r_transitional,
                         p.mean_r_non_transitional, p.gops_violation_ratio, p.dropped_ratio);
    }
    close_checked(out, path);
    files.push_back(path);
    write_manifest(cfg.out_dir, cfg, "sweep", files);
  }
  return points;
}

hmarl::TrainResult run_training(const ExperimentConfig& cfg) {
  ensure_dir(cfg.out_dir);
  auto tc = cfg.train;
  tc.checkpoint_dir = cfg.out_dir;
  const int every = tc.checkpoint_every;

  auto result = hmarl::train(cfg.env, tc, [&](const hmarl::IterationStats& s, const auto&) {
    if (s.iteration % 10 == 0 || s.iteration == tc.iterations) {
      spdlog::info("iter {}/{}: r_cc/episode {:.2f} objective {:.4f} gops_viol {:.3f}", s.iteration,
                   tc.iterations, s.mean_episode_r_cc, s.mean_objective, s.gops_violation_ratio);
    }
  });
  if (every == 0) {
    hmarl::save_checkpoint(hmarl::checkpoint_path(cfg.out_dir, tc.iterations),
                           {tc.iterations, result.high, result.low});
  }

  const auto curve = cfg.out_dir / "train_curve.csv";
  {
    auto out = open_csv(curve);
    out << "iteration,mean_episode_r_cc,mean_step_r_cc,mean_low_reward,mean_objective,"
           "gops_violation_ratio,high_entropy,low_entropy,high_loss,low_loss\n";
    for (const auto& s : result.curve) {
      out << fmt::format("{},{},{},{},{},{},{},{},{},{}\n", s.iteration, s.mean_episode_r_cc,
                         s.mean_step_r_cc, s.mean_low_reward, s.mean_objective,
                         s.gops_violation_ratio, s.high_entropy, s.low_entropy, s.high_loss,
                         s.low_loss);
    }
    close_checked(out, curve);
  }
  std::vector<fs::path> files{curve};
  for (const auto& entry : fs::directory_iterator(cfg.out_dir)) {
    const auto name = entry.path().filename().string();
    if (name.starts_with("checkpoint_") && name.ends_with(".bin")) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  write_manifest(cfg.out_dir, cfg, "train", files);
  return result;
}

}  // namespace fsho
