#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fsho/env.hpp"
#include "fsho/hmarl/trainer.hpp"
#include "fsho/optimizer.hpp"

namespace fsho {

/// Version string in `git describe` style, fixed at build time.
std::string version_string();

struct SweepSpec {
  std::string axis = "g_th";
  std::vector<double> values;
};

struct ExperimentConfig {
  EnvConfig env;
  hmarl::TrainConfig train;
  PolicyKind policy;
  int episodes = 50;
  std::vector<std::uint64_t> seeds{1};
  std::filesystem::path out_dir = "out";
  /// Trained weights for policy=hmarl. Without one, a policy is trained per seed.
  std::optional<std::filesystem::path> checkpoint;
  std::optional<SweepSpec> sweep;

  /// Throws ConfigError.
  void validate() const;
};

/// Strict JSON parsing: every section is optional and defaulted, unknown keys
/// and wrong types are errors naming the field. Relative paths resolve
/// against base_dir.
ExperimentConfig parse_config(std::string_view json_text,
                              const std::filesystem::path& base_dir = ".");
/// Throws IoError if the file cannot be read, ConfigError/SchemaError on content.
ExperimentConfig load_config(const std::filesystem::path& path);

/// Canonical (sorted-key) JSON of the full effective configuration.
std::string config_to_json(const ExperimentConfig& cfg);
/// SHA-256 of config_to_json.
std::string config_hash(const ExperimentConfig& cfg);

std::string sha256_hex(std::string_view data);
std::string sha256_file(const std::filesystem::path& path);

struct EpisodeMetrics {
  int episode = 0;
  std::uint64_t seed = 0;
  int steps = 0;
  int gops_violation_steps = 0;
  int midhaul_violation_steps = 0;
  double dropped_ratio = 0.0;      // dropped user-steps / user-steps
  double r_transitional = 0.0;     // per-step R(T), averaged over the episode
  double r_non_transitional = 0.0;
  double mean_objective = 0.0;
  double mean_r_cc = 0.0;

  [[nodiscard]] double gops_violation_ratio() const {
    return steps > 0 ? static_cast<double>(gops_violation_steps) / steps : 0.0;
  }
};

/// One row of timeseries.csv.
struct StepRecord {
  std::uint64_t seed = 0;
  int episode = 0;
  int t = 0;
  GroupAssignment assignment;
  bool gops_violation = false;
  bool midhaul_violation = false;
  int n_transitional = 0;
  int n_connected = 0;
  int n_disconnected = 0;
  int n_dropped = 0;
  double r_transitional = 0.0;
  double r_non_transitional = 0.0;
  double objective = 0.0;
  double r_cc = 0.0;
  double mean_delay_ms = 0.0;
};

/// Reset seed of episode `episode` under experiment seed `seed`.
std::uint64_t episode_seed(std::uint64_t seed, int episode);

/// Runs one full episode and returns its metrics; per-step rows are appended
/// to `steps` when given.
EpisodeMetrics run_episode(Env& env, Policy& policy, std::uint64_t seed, int episode,
                           std::vector<StepRecord>* steps = nullptr);

/// Trained HMARL weights keyed by experiment seed.
using TrainedPolicies = std::map<std::uint64_t, hmarl::Checkpoint>;

/// Builds the decision maker for one experiment seed. For hmarl the
/// checkpoint in cfg wins, then `trained`, and otherwise a policy is trained
/// with train.seed = seed and cached in `trained`.
std::unique_ptr<Policy> make_policy(const ExperimentConfig& cfg, std::uint64_t seed,
                                    TrainedPolicies* trained = nullptr);

struct ExperimentResult {
  std::vector<EpisodeMetrics> episodes;
  std::vector<std::filesystem::path> files;
};

/// Every seed x episode of the configured policy. Writes summary.csv,
/// timeseries.csv, cdf_dropped_pct.csv, cdf_objective.csv and manifest.json
/// into cfg.out_dir. Throws IoError naming the path on write failure.
ExperimentResult run_experiment(const ExperimentConfig& cfg, TrainedPolicies* trained = nullptr);

/// Same episodes as run_experiment without touching the filesystem.
std::vector<EpisodeMetrics> evaluate_policy(const ExperimentConfig& cfg,
                                            TrainedPolicies* trained = nullptr);

struct SweepPoint {
  double value = 0.0;
  double mean_objective = 0.0;
  double mean_r_transitional = 0.0;
  double mean_r_non_transitional = 0.0;
  double gops_violation_ratio = 0.0;
  double dropped_ratio = 0.0;
  std::vector<EpisodeMetrics> episodes;
};

/// Evaluates the configured policy at each sweep value; one output
/// subdirectory per point plus sweep.csv. Learned policies are trained once
/// per seed at the base config and then held fixed across points.
std::vector<SweepPoint> run_sweep(const ExperimentConfig& cfg, const SweepSpec& sweep,
                                  bool write_files = true, TrainedPolicies* trained = nullptr);

/// Trains and writes checkpoint_<iter>.bin, train_curve.csv and manifest.json.
hmarl::TrainResult run_training(const ExperimentConfig& cfg);

/// Empirical CDF: sorted distinct values with the cumulative fraction at each.
/// Throws ContractError on empty input.
std::vector<std::pair<double, double>> empirical_cdf(std::span<const double> values);
void export_cdf(const std::filesystem::path& path, std::string_view metric,
                std::span<const double> values);
std::vector<std::pair<double, double>> read_cdf(const std::filesystem::path& path);

void write_summary_csv(const std::filesystem::path& path, std::span<const EpisodeMetrics> rows);
void write_timeseries_csv(const std::filesystem::path& path, std::span<const StepRecord> rows,
                          int n_ecs);
void write_manifest(const std::filesystem::path& dir, const ExperimentConfig& cfg,
                    std::string_view command, std::span<const std::filesystem::path> files);

}  // namespace fsho
