#include <spdlog/spdlog.h>

#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fsho/errors.hpp"
#include "fsho/harness.hpp"

namespace {

void configure_logging() {
  spdlog::set_pattern("[%l] %v");
  const char* level = std::getenv("SIM_LOG");
  if (!level) {
    spdlog::set_level(spdlog::level::info);
    return;
  }
  const std::string v = level;
  if (v == "debug") {
    spdlog::set_level(spdlog::level::debug);
  } else if (v == "info") {
    spdlog::set_level(spdlog::level::info);
  } else {
    spdlog::set_level(spdlog::level::info);
    spdlog::warn("SIM_LOG='{}' not recognised (use debug or info)", v);
  }
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto comma = text.find(',', pos);
    const auto item = text.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    if (item.empty()) throw fsho::ConfigError("--seeds: empty entry in '" + text + "'");
    std::size_t used = 0;
    const auto v = std::stoull(item, &used);
    if (used != item.size()) throw fsho::ConfigError("--seeds: not an integer: '" + item + "'");
    out.push_back(v);
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

std::vector<double> parse_values(const std::string& text) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto comma = text.find(',', pos);
    auto item = text.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    double scale = 1.0;
    if (!item.empty() && (item.back() == 'k' || item.back() == 'K')) {
      scale = 1000.0;
      item.pop_back();
    }
    std::size_t used = 0;
    const double v = std::stod(item, &used);
    if (used != item.size()) throw fsho::ConfigError("--values: not a number: '" + item + "'");
    out.push_back(v * scale);
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  configure_logging();
  CLI::App app{"Functional-split soft-handover simulator"};
  app.require_subcommand(1);

  std::string config_path;
  std::string policy;
  int episodes = 0;
  std::string seeds;
  std::string out_dir;
  std::string checkpoint;
  int iters = 0;
  std::string axis = "g_th";
  std::string values;

  auto* simulate = app.add_subcommand("simulate", "Run a policy for seeds x episodes");
  simulate->add_option("--config", config_path, "JSON config")->required()->check(CLI::ExistingFile);
  simulate->add_option("--policy", policy, "hmarl | static:<f> | random | optimal");
  simulate->add_option("--episodes", episodes, "Episodes per seed")->check(CLI::PositiveNumber);
  simulate->add_option("--seeds", seeds, "Comma-separated seeds");
  simulate->add_option("--out", out_dir, "Output directory");
  simulate->add_option("--checkpoint", checkpoint, "Trained weights for --policy hmarl")
      ->check(CLI::ExistingFile);

  auto* train = app.add_subcommand("train", "Train the hierarchical policy");
  train->add_option("--config", config_path, "JSON config")->required()->check(CLI::ExistingFile);
  train->add_option("--iters", iters, "PPO iterations")->check(CLI::PositiveNumber);
  train->add_option("--out", out_dir, "Output directory");

  auto* sweep = app.add_subcommand("sweep", "Evaluate the configured policy over a parameter axis");
  sweep->add_option("--config", config_path, "JSON config")->required()->check(CLI::ExistingFile);
  sweep->add_option("--axis", axis, "Sweep axis")->check(CLI::IsMember({"g_th"}));
  sweep->add_option("--values", values, "Comma-separated values, e.g. 14k,15k,16k");
  sweep->add_option("--policy", policy, "Override the configured policy");
  sweep->add_option("--episodes", episodes, "Episodes per seed")->check(CLI::PositiveNumber);
  sweep->add_option("--seeds", seeds, "Comma-separated seeds");
  sweep->add_option("--out", out_dir, "Output directory");
  sweep->add_option("--checkpoint", checkpoint, "Trained weights for --policy hmarl")
      ->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    auto cfg = fsho::load_config(config_path);
    if (!policy.empty()) cfg.policy = fsho::PolicyKind::parse(policy);
    if (episodes > 0) cfg.episodes = episodes;
    if (!seeds.empty()) cfg.seeds = parse_seeds(seeds);
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (!checkpoint.empty()) cfg.checkpoint = checkpoint;
    if (iters > 0) cfg.train.iterations = iters;
    cfg.validate();

    if (*simulate) {
      const auto r = fsho::run_experiment(cfg);
      double objective = 0.0;
      for (const auto& m : r.episodes) objective += m.mean_objective / r.episodes.size();
      std::cout << cfg.policy.to_string() << ": " << r.episodes.size()
                << " episodes, mean objective " << objective << ", output " << cfg.out_dir.string()
                << '\n';
    } else if (*train) {
      const auto r = fsho::run_training(cfg);
      std::cout << "trained " << r.curve.size() << " iterations, final r_cc/episode "
                << r.curve.back().mean_episode_r_cc << ", output " << cfg.out_dir.string() << '\n';
    } else if (*sweep) {
      fsho::SweepSpec spec = cfg.sweep.value_or(fsho::SweepSpec{});
      spec.axis = axis;
      if (!values.empty()) spec.values = parse_values(values);
      if (spec.values.empty()) spec.values = {14000, 15000, 16000, 17000, 18000};
      const auto points = fsho::run_sweep(cfg, spec);
      for (const auto& p : points) {
        std::cout << axis << '=' << p.value << " objective " << p.mean_objective
                  << " gops_violation " << p.gops_violation_ratio << '\n';
      }
    }
  } catch (const fsho::Error& e) {
    spdlog::error("{}", e.what());
    return 2;
  } catch (const std::exception& e) {
    spdlog::error("unexpected failure: {}", e.what());
    return 1;
  }
  return 0;
}
