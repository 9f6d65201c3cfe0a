#pragma once

#include <Eigen/Dense>

#include <span>
#include <vector>

#include "fsho/hmarl/network.hpp"

namespace fsho::hmarl {

struct PpoConfig {
  double clip = 0.2;
  double entropy_coef = 0.01;
  double value_coef = 0.5;
  double learning_rate = 3e-4;
  double gamma = 0.99;
  double gae_lambda = 0.95;
  int epochs = 4;
  int minibatch = 64;
  double max_grad_norm = 0.5;

  /// Throws ConfigError.
  void validate() const;
};

struct Transition {
  std::vector<double> obs;
  int action = 0;  // 0-based
  double log_prob = 0.0;
  double value = 0.0;
  double reward = 0.0;
  bool done = false;
};

struct Trajectory {
  std::vector<Transition> steps;
  std::vector<double> advantages;
  std::vector<double> returns;
  double bootstrap_value = 0.0;  // V(s_T) when the last step is not terminal
};

/// Generalised advantage estimation with the trajectory's own gamma/lambda.
void compute_gae(Trajectory& traj, double gamma, double lambda);

/// Flat training batch, one column per sample.
struct Batch {
  Eigen::MatrixXd obs;  // obs_dim x N
  std::vector<int> actions;
  Eigen::VectorXd old_log_probs;
  Eigen::VectorXd advantages;
  Eigen::VectorXd returns;

  [[nodiscard]] Eigen::Index size() const noexcept { return obs.cols(); }
  [[nodiscard]] Batch subset(std::span<const Eigen::Index> idx) const;
};

/// Concatenates trajectories (GAE already computed) into one batch.
Batch make_batch(std::span<const Trajectory> trajectories);
void normalize_advantages(Batch& batch);

/// Per-sample clipped surrogate min(r A, clip(r, 1-eps, 1+eps) A).
double clipped_surrogate(double ratio, double advantage, double clip);

/// Which loss terms enter the total; used to check each gradient alone.
struct LossWeights {
  double policy = 1.0;
  double value = 1.0;    // multiplies value_coef
  double entropy = 1.0;  // multiplies entropy_coef
};

struct LossTerms {
  double policy_loss = 0.0;  // -mean surrogate
  double value_loss = 0.0;   // 0.5 mean (V - R)^2
  double entropy = 0.0;      // mean entropy
  double total = 0.0;
  double approx_kl = 0.0;
  double clip_fraction = 0.0;
};

struct LossAndGrad {
  LossTerms terms;
  PolicyParams grad;
};

/// Loss to minimise:
///   policy_loss + value_coef * value_loss - entropy_coef * entropy
/// with hand-derived gradients for every parameter.
LossAndGrad ppo_loss_and_grad(const PolicyParams& params, const Batch& batch,
                              const PpoConfig& cfg, const LossWeights& weights = {});

/// Same loss without gradients, for finite-difference checks.
LossTerms ppo_loss(const PolicyParams& params, const Batch& batch, const PpoConfig& cfg,
                   const LossWeights& weights = {});

class Adam {
 public:
  Adam() = default;
  Adam(std::size_t n, double lr) : m_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n))),
                                   v_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n))),
                                   lr_(lr) {}

  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad);
  [[nodiscard]] double learning_rate() const noexcept { return lr_; }

 private:
  Eigen::VectorXd m_;
  Eigen::VectorXd v_;
  double lr_ = 3e-4;
  double beta1_ = 0.9;
  double beta2_ = 0.999;
  double eps_ = 1e-8;
  long t_ = 0;
};

struct UpdateStats {
  LossTerms last;
  double mean_total = 0.0;
  int gradient_steps = 0;
};

/// PPO epochs over one batch. Throws TrainingError on a non-finite loss.
UpdateStats ppo_update(PolicyParams& params, Adam& adam, Batch batch, const PpoConfig& cfg,
                       Rng& rng);

/// Shared-policy update: each agent's minibatch gradient is computed on its
/// own batch, the gradients are averaged (parameter-server aggregation) and a
/// single step is applied to the shared parameters.
UpdateStats ppo_update_shared(PolicyParams& params, Adam& adam, std::vector<Batch> per_agent,
                              const PpoConfig& cfg, Rng& rng);

}  // namespace fsho::hmarl
