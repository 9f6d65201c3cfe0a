#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <vector>

#include "fsho/scenario.hpp"

namespace fsho::hmarl {

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;    // out
};

/// Feed-forward net, tanh on hidden layers, identity on the output layer.
struct Mlp {
  std::vector<DenseLayer> layers;

  [[nodiscard]] int input_dim() const { return static_cast<int>(layers.front().weight.cols()); }
  [[nodiscard]] int output_dim() const { return static_cast<int>(layers.back().weight.rows()); }
};

/// Stochastic policy: an actor producing action logits and a separate value
/// tower. Gradients use the same type, so everything that works on
/// parameters (averaging, Adam) works on gradients too.
struct PolicyParams {
  Mlp actor;
  Mlp critic;

  [[nodiscard]] int obs_dim() const { return actor.input_dim(); }
  [[nodiscard]] int n_actions() const { return actor.output_dim(); }
};

struct NetworkShape {
  int obs_dim = 0;
  int n_actions = 0;
  int hidden = 64;
  int hidden_layers = 2;
};

/// Scaled-Gaussian init; the actor's output layer starts near zero so the
/// initial policy is close to uniform.
PolicyParams make_policy(const NetworkShape& shape, Rng& rng);
PolicyParams zeros_like(const PolicyParams& p);

[[nodiscard]] std::size_t num_params(const PolicyParams& p);
Eigen::VectorXd flatten(const PolicyParams& p);
void unflatten(PolicyParams& p, const Eigen::VectorXd& flat);
[[nodiscard]] bool same_shape(const PolicyParams& a, const PolicyParams& b);
[[nodiscard]] bool all_finite(const PolicyParams& p);

struct PolicyOutput {
  Eigen::VectorXd probs;
  double value = 0.0;
};

/// Throws ContractError if obs.size() != obs_dim.
PolicyOutput forward_policy(const PolicyParams& params, std::span<const double> obs);

struct ActionSample {
  int action = 0;  // 0-based index into the distribution
  double log_prob = 0.0;
};

ActionSample sample_action(const Eigen::VectorXd& probs, Rng& rng);

/// Index of the largest probability; ties go to the lowest index.
int argmax_action(const Eigen::VectorXd& probs);
int act_greedy(const PolicyParams& params, std::span<const double> obs);

/// Element-wise mean of shape-identical parameter (or gradient) sets.
/// Throws ContractError on empty input or shape mismatch.
PolicyParams aggregate_shared_policy(std::span<const PolicyParams> per_agent);

/// Activations kept for the backward pass of a batched forward.
struct MlpCache {
  std::vector<Eigen::MatrixXd> activations;  // [0] = input, then each layer output
};

/// Batched forward; inputs are column-per-sample.
Eigen::MatrixXd mlp_forward(const Mlp& net, const Eigen::MatrixXd& input, MlpCache* cache);

/// Accumulates dL/dparams into grad given dL/doutput (column-per-sample).
void mlp_backward(const Mlp& net, const MlpCache& cache, const Eigen::MatrixXd& d_output,
                  Mlp& grad);

}  // namespace fsho::hmarl
