#include "fsho/hmarl/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "fsho/errors.hpp"

namespace fsho::hmarl {

void PpoConfig::validate() const {
  if (!(clip > 0.0 && clip < 1.0)) throw ConfigError("ppo.clip must be in (0,1)");
  if (!(entropy_coef >= 0.0)) throw ConfigError("ppo.entropy_coef must be >= 0");
  if (!(value_coef >= 0.0)) throw ConfigError("ppo.value_coef must be >= 0");
  if (!(learning_rate > 0.0)) throw ConfigError("ppo.learning_rate must be > 0");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("ppo.gamma must be in [0,1]");
  if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0)) throw ConfigError("ppo.gae_lambda must be in [0,1]");
  if (epochs < 1) throw ConfigError("ppo.epochs must be >= 1");
  if (minibatch < 1) throw ConfigError("ppo.minibatch must be >= 1");
  if (!(max_grad_norm > 0.0)) throw ConfigError("ppo.max_grad_norm must be > 0");
}

void compute_gae(Trajectory& traj, double gamma, double lambda) {
  const std::size_t n = traj.steps.size();
  traj.advantages.assign(n, 0.0);
  traj.returns.assign(n, 0.0);
  double next_adv = 0.0;
  double next_value = traj.bootstrap_value;
  for (std::size_t i = n; i-- > 0;) {
    const auto& s = traj.steps[i];
    const double not_done = s.done ? 0.0 : 1.0;
    const double delta = s.reward + gamma * next_value * not_done - s.value;
    next_adv = delta + gamma * lambda * not_done * next_adv;
    traj.advantages[i] = next_adv;
    traj.returns[i] = next_adv + s.value;
    next_value = s.value;
  }
}

Batch Batch::subset(std::span<const Eigen::Index> idx) const {
  Batch b;
  const auto n = static_cast<Eigen::Index>(idx.size());
  b.obs.resize(obs.rows(), n);
  b.actions.resize(idx.size());
  b.old_log_probs.resize(n);
  b.advantages.resize(n);
  b.returns.resize(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const Eigen::Index i = idx[static_cast<std::size_t>(k)];
    b.obs.col(k) = obs.col(i);
    b.actions[static_cast<std::size_t>(k)] = actions[static_cast<std::size_t>(i)];
    b.old_log_probs[k] = old_log_probs[i];
    b.advantages[k] = advantages[i];
    b.returns[k] = returns[i];
  }
  return b;
}

Batch make_batch(std::span<const Trajectory> trajectories) {
  std::size_t n = 0;
  std::size_t dim = 0;
  for (const auto& t : trajectories) {
    if (t.advantages.size() != t.steps.size()) {
      throw ContractError("make_batch: trajectory advantages not computed");
    }
    n += t.steps.size();
    if (!t.steps.empty()) dim = t.steps.front().obs.size();
  }
  if (n == 0) throw ContractError("make_batch: no transitions");
  Batch b;
  b.obs.resize(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(n));
  b.actions.reserve(n);
  b.old_log_probs.resize(static_cast<Eigen::Index>(n));
  b.advantages.resize(static_cast<Eigen::Index>(n));
  b.returns.resize(static_cast<Eigen::Index>(n));
  Eigen::Index k = 0;
  for (const auto& t : trajectories) {
    for (std::size_t i = 0; i < t.steps.size(); ++i, ++k) {
      const auto& s = t.steps[i];
      if (s.obs.size() != dim) throw ContractError("make_batch: inconsistent observation size");
      b.obs.col(k) = Eigen::Map<const Eigen::VectorXd>(s.obs.data(), static_cast<Eigen::Index>(dim));
      b.actions.push_back(s.action);
      b.old_log_probs[k] = s.log_prob;
      b.advantages[k] = t.advantages[i];
      b.returns[k] = t.returns[i];
    }
  }
  return b;
}

void normalize_advantages(Batch& batch) {
  const auto n = batch.advantages.size();
  if (n < 2) return;
  const double mean = batch.advantages.mean();
  const double var = (batch.advantages.array() - mean).square().sum() / static_cast<double>(n);
  batch.advantages = (batch.advantages.array() - mean) / (std::sqrt(var) + 1e-8);
}

double clipped_surrogate(double ratio, double advantage, double clip) {
  const double clipped = std::clamp(ratio, 1.0 - clip, 1.0 + clip);
  return std::min(ratio * advantage, clipped * advantage);
}

namespace {

struct Forward {
  MlpCache actor_cache;
  MlpCache critic_cache;
  Eigen::MatrixXd log_probs;  // n_actions x N
  Eigen::MatrixXd probs;
  Eigen::VectorXd values;
};

Forward run_forward(const PolicyParams& params, const Batch& batch) {
  Forward f;
  const Eigen::MatrixXd logits = mlp_forward(params.actor, batch.obs, &f.actor_cache);
  f.log_probs.resize(logits.rows(), logits.cols());
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    const double m = logits.col(j).maxCoeff();
    const double lse = m + std::log((logits.col(j).array() - m).exp().sum());
    f.log_probs.col(j) = logits.col(j).array() - lse;
  }
  f.probs = f.log_probs.array().exp();
  f.values = mlp_forward(params.critic, batch.obs, &f.critic_cache).row(0).transpose();
  return f;
}

LossTerms loss_terms(const Forward& f, const Batch& batch, const PpoConfig& cfg,
                     const LossWeights& w, Eigen::MatrixXd* d_logits, Eigen::MatrixXd* d_values) {
  const Eigen::Index n = batch.size();
  const double inv_n = 1.0 / static_cast<double>(n);
  LossTerms t;
  if (d_logits) d_logits->setZero(f.log_probs.rows(), n);
  if (d_values) d_values->setZero(1, n);

  for (Eigen::Index j = 0; j < n; ++j) {
    const int a = batch.actions[static_cast<std::size_t>(j)];
    const double logp = f.log_probs(a, j);
    const double ratio = std::exp(logp - batch.old_log_probs[j]);
    const double adv = batch.advantages[j];
    const double unclipped = ratio * adv;
    const double clipped = std::clamp(ratio, 1.0 - cfg.clip, 1.0 + cfg.clip) * adv;
    const bool unclipped_active = unclipped <= clipped;
    t.policy_loss -= std::min(unclipped, clipped) * inv_n;
    t.approx_kl += (batch.old_log_probs[j] - logp) * inv_n;
    if (std::abs(ratio - 1.0) > cfg.clip) t.clip_fraction += inv_n;

    const auto p = f.probs.col(j);
    const auto lp = f.log_probs.col(j);
    const double entropy = -(p.array() * lp.array()).sum();
    t.entropy += entropy * inv_n;

    const double v_err = f.values[j] - batch.returns[j];
    t.value_loss += 0.5 * v_err * v_err * inv_n;

    if (d_logits) {
      auto col = d_logits->col(j);
      // policy: dL/dlogp_a = -ratio * A / N on the unclipped branch
      if (unclipped_active && w.policy != 0.0) {
        const double g = -w.policy * ratio * adv * inv_n;
        col -= g * p;
        col[a] += g;
      }
      // entropy: dH/dz_k = -p_k (log p_k + H)
      if (w.entropy != 0.0) {
        const double c = w.entropy * cfg.entropy_coef * inv_n;
        col.array() += c * p.array() * (lp.array() + entropy);
      }
    }
    if (d_values && w.value != 0.0) {
      (*d_values)(0, j) = w.value * cfg.value_coef * v_err * inv_n;
    }
  }
  t.total = w.policy * t.policy_loss + w.value * cfg.value_coef * t.value_loss -
            w.entropy * cfg.entropy_coef * t.entropy;
  return t;
}

void check_finite(const LossTerms& t, const char* where) {
  if (std::isfinite(t.total) && std::isfinite(t.policy_loss) && std::isfinite(t.value_loss) &&
      std::isfinite(t.entropy)) {
    return;
  }
  std::ostringstream msg;
  msg << where << ": non-finite loss (policy=" << t.policy_loss << ", value=" << t.value_loss
      << ", entropy=" << t.entropy << ", approx_kl=" << t.approx_kl << ")";
  throw TrainingError(msg.str());
}

Eigen::VectorXd clip_by_norm(Eigen::VectorXd g, double max_norm) {
  const double norm = g.norm();
  if (norm > max_norm) g *= max_norm / norm;
  return g;
}

std::vector<Eigen::Index> shuffled(Eigen::Index n, Rng& rng) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  std::shuffle(idx.begin(), idx.end(), rng);
  return idx;
}

}  // namespace

LossAndGrad ppo_loss_and_grad(const PolicyParams& params, const Batch& batch,
                              const PpoConfig& cfg, const LossWeights& weights) {
  if (batch.obs.rows() != params.obs_dim()) {
    throw ContractError("ppo_loss_and_grad: batch observation size does not match policy");
  }
  const Forward f = run_forward(params, batch);
  Eigen::MatrixXd d_logits;
  Eigen::MatrixXd d_values;
  LossAndGrad out;
  out.terms = loss_terms(f, batch, cfg, weights, &d_logits, &d_values);
  out.grad = zeros_like(params);
  mlp_backward(params.actor, f.actor_cache, d_logits, out.grad.actor);
  mlp_backward(params.critic, f.critic_cache, d_values, out.grad.critic);
  return out;
}

LossTerms ppo_loss(const PolicyParams& params, const Batch& batch, const PpoConfig& cfg,
                   const LossWeights& weights) {
  const Forward f = run_forward(params, batch);
  return loss_terms(f, batch, cfg, weights, nullptr, nullptr);
}

void Adam::step(Eigen::VectorXd& params, const Eigen::VectorXd& grad) {
  if (m_.size() != params.size()) {
    m_ = Eigen::VectorXd::Zero(params.size());
    v_ = Eigen::VectorXd::Zero(params.size());
    t_ = 0;
  }
  ++t_;
  m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
  v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  params.array() -= lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
}

UpdateStats ppo_update(PolicyParams& params, Adam& adam, Batch batch, const PpoConfig& cfg,
                       Rng& rng) {
  std::vector<Batch> one;
  one.push_back(std::move(batch));
  return ppo_update_shared(params, adam, std::move(one), cfg, rng);
}

UpdateStats ppo_update_shared(PolicyParams& params, Adam& adam, std::vector<Batch> per_agent,
                              const PpoConfig& cfg, Rng& rng) {
  if (per_agent.empty()) throw ContractError("ppo_update: no batches");
  for (auto& b : per_agent) {
    if (b.size() == 0) throw ContractError("ppo_update: empty batch");
    normalize_advantages(b);
  }
  UpdateStats stats;
  double total_sum = 0.0;
  Eigen::VectorXd flat = flatten(params);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<std::vector<Eigen::Index>> orders;
    orders.reserve(per_agent.size());
    for (const auto& b : per_agent) orders.push_back(shuffled(b.size(), rng));
    Eigen::Index longest = 0;
    for (const auto& b : per_agent) longest = std::max(longest, b.size());

    for (Eigen::Index start = 0; start < longest; start += cfg.minibatch) {
      std::vector<PolicyParams> grads;
      LossTerms mean_terms;
      for (std::size_t k = 0; k < per_agent.size(); ++k) {
        const auto& order = orders[k];
        const auto n = static_cast<Eigen::Index>(order.size());
        if (start >= n) continue;
        const auto end = std::min(n, start + cfg.minibatch);
        const std::span<const Eigen::Index> idx(order.data() + start,
                                                static_cast<std::size_t>(end - start));
        auto lg = ppo_loss_and_grad(params, per_agent[k].subset(idx), cfg);
        check_finite(lg.terms, "ppo_update");
        mean_terms.total += lg.terms.total;
        mean_terms.policy_loss += lg.terms.policy_loss;
        mean_terms.value_loss += lg.terms.value_loss;
        mean_terms.entropy += lg.terms.entropy;
        mean_terms.approx_kl += lg.terms.approx_kl;
        mean_terms.clip_fraction += lg.terms.clip_fraction;
        grads.push_back(std::move(lg.grad));
      }
      const double k = static_cast<double>(grads.size());
      mean_terms.total /= k;
      mean_terms.policy_loss /= k;
      mean_terms.value_loss /= k;
      mean_terms.entropy /= k;
      mean_terms.approx_kl /= k;
      mean_terms.clip_fraction /= k;

      const PolicyParams g = grads.size() == 1 ? std::move(grads.front())
                                               : aggregate_shared_policy(grads);
      const Eigen::VectorXd gflat = clip_by_norm(flatten(g), cfg.max_grad_norm);
      if (!gflat.allFinite()) throw TrainingError("ppo_update: non-finite gradient");
      adam.step(flat, gflat);
      unflatten(params, flat);

      stats.last = mean_terms;
      total_sum += mean_terms.total;
      ++stats.gradient_steps;
    }
  }
  stats.mean_total = stats.gradient_steps > 0 ? total_sum / stats.gradient_steps : 0.0;
  if (!all_finite(params)) throw TrainingError("ppo_update: parameters became non-finite");
  return stats;
}

}  // namespace fsho::hmarl
