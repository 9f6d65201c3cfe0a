#include "fsho/hmarl/network.hpp"

#include <cmath>
#include <string>

#include "fsho/errors.hpp"

namespace fsho::hmarl {

namespace {

Mlp make_mlp(int in, int hidden, int hidden_layers, int out, double out_scale, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Mlp net;
  int prev = in;
  for (int l = 0; l <= hidden_layers; ++l) {
    const bool last = l == hidden_layers;
    const int width = last ? out : hidden;
    const double scale = (last ? out_scale : 1.0) / std::sqrt(static_cast<double>(prev));
    DenseLayer layer;
    layer.weight.resize(width, prev);
    for (Eigen::Index i = 0; i < layer.weight.size(); ++i) layer.weight.data()[i] = normal(rng) * scale;
    layer.bias = Eigen::VectorXd::Zero(width);
    net.layers.push_back(std::move(layer));
    prev = width;
  }
  return net;
}

Mlp zeros_like(const Mlp& m) {
  Mlp z;
  for (const auto& l : m.layers) {
    z.layers.push_back({Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()),
                        Eigen::VectorXd::Zero(l.bias.size())});
  }
  return z;
}

template <typename Fn>
void for_each_block(PolicyParams& p, Fn&& fn) {
  for (Mlp* net : {&p.actor, &p.critic}) {
    for (auto& l : net->layers) {
      fn(l.weight.data(), l.weight.size());
      fn(l.bias.data(), l.bias.size());
    }
  }
}

template <typename Fn>
void for_each_block(const PolicyParams& p, Fn&& fn) {
  for (const Mlp* net : {&p.actor, &p.critic}) {
    for (const auto& l : net->layers) {
      fn(l.weight.data(), l.weight.size());
      fn(l.bias.data(), l.bias.size());
    }
  }
}

bool same_shape(const Mlp& a, const Mlp& b) {
  if (a.layers.size() != b.layers.size()) return false;
  for (std::size_t i = 0; i < a.layers.size(); ++i) {
    if (a.layers[i].weight.rows() != b.layers[i].weight.rows() ||
        a.layers[i].weight.cols() != b.layers[i].weight.cols() ||
        a.layers[i].bias.size() != b.layers[i].bias.size()) {
      return false;
    }
  }
  return true;
}

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  const double m = logits.maxCoeff();
  Eigen::VectorXd e = (logits.array() - m).exp();
  return e / e.sum();
}

}  // namespace

PolicyParams make_policy(const NetworkShape& shape, Rng& rng) {
  if (shape.obs_dim < 1 || shape.n_actions < 1 || shape.hidden < 1 || shape.hidden_layers < 0) {
    throw ContractError("make_policy: invalid network shape");
  }
  PolicyParams p;
  p.actor = make_mlp(shape.obs_dim, shape.hidden, shape.hidden_layers, shape.n_actions, 0.01, rng);
  p.critic = make_mlp(shape.obs_dim, shape.hidden, shape.hidden_layers, 1, 1.0, rng);
  return p;
}

PolicyParams zeros_like(const PolicyParams& p) {
  return {zeros_like(p.actor), zeros_like(p.critic)};
}

std::size_t num_params(const PolicyParams& p) {
  std::size_t n = 0;
  for_each_block(p, [&](const double*, Eigen::Index size) { n += static_cast<std::size_t>(size); });
  return n;
}

Eigen::VectorXd flatten(const PolicyParams& p) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(num_params(p)));
  Eigen::Index at = 0;
  for_each_block(p, [&](const double* data, Eigen::Index size) {
    out.segment(at, size) = Eigen::Map<const Eigen::VectorXd>(data, size);
    at += size;
  });
  return out;
}

void unflatten(PolicyParams& p, const Eigen::VectorXd& flat) {
  if (static_cast<std::size_t>(flat.size()) != num_params(p)) {
    throw ContractError("unflatten: expected " + std::to_string(num_params(p)) + " values, got " +
                        std::to_string(flat.size()));
  }
  Eigen::Index at = 0;
  for_each_block(p, [&](double* data, Eigen::Index size) {
    Eigen::Map<Eigen::VectorXd>(data, size) = flat.segment(at, size);
    at += size;
  });
}

bool same_shape(const PolicyParams& a, const PolicyParams& b) {
  return same_shape(a.actor, b.actor) && same_shape(a.critic, b.critic);
}

bool all_finite(const PolicyParams& p) {
  bool ok = true;
  for_each_block(p, [&](const double* data, Eigen::Index size) {
    ok = ok && Eigen::Map<const Eigen::VectorXd>(data, size).allFinite();
  });
  return ok;
}

Eigen::MatrixXd mlp_forward(const Mlp& net, const Eigen::MatrixXd& input, MlpCache* cache) {
  if (input.rows() != net.input_dim()) {
    throw ContractError("mlp_forward: input has " + std::to_string(input.rows()) +
                        " rows, network expects " + std::to_string(net.input_dim()));
  }
  if (cache) {
    cache->activations.clear();
    cache->activations.push_back(input);
  }
  Eigen::MatrixXd x = input;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const auto& layer = net.layers[l];
    Eigen::MatrixXd z = layer.weight * x;
    z.colwise() += layer.bias;
    if (l + 1 < net.layers.size()) z = z.array().tanh();
    x = std::move(z);
    if (cache) cache->activations.push_back(x);
  }
  return x;
}

void mlp_backward(const Mlp& net, const MlpCache& cache, const Eigen::MatrixXd& d_output,
                  Mlp& grad) {
  Eigen::MatrixXd delta = d_output;
  for (std::size_t l = net.layers.size(); l-- > 0;) {
    const auto& input = cache.activations[l];
    grad.layers[l].weight.noalias() += delta * input.transpose();
    grad.layers[l].bias += delta.rowwise().sum();
    if (l == 0) break;
    Eigen::MatrixXd back = net.layers[l].weight.transpose() * delta;
    // input of layer l is tanh output of layer l-1
    delta = back.array() * (1.0 - input.array().square());
  }
}

PolicyOutput forward_policy(const PolicyParams& params, std::span<const double> obs) {
  if (static_cast<int>(obs.size()) != params.obs_dim()) {
    throw ContractError("forward_policy: observation has " + std::to_string(obs.size()) +
                        " entries, policy expects " + std::to_string(params.obs_dim()));
  }
  const Eigen::MatrixXd x =
      Eigen::Map<const Eigen::VectorXd>(obs.data(), static_cast<Eigen::Index>(obs.size()));
  PolicyOutput out;
  out.probs = softmax(mlp_forward(params.actor, x, nullptr).col(0));
  out.value = mlp_forward(params.critic, x, nullptr)(0, 0);
  return out;
}

ActionSample sample_action(const Eigen::VectorXd& probs, Rng& rng) {
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  double acc = 0.0;
  int chosen = static_cast<int>(probs.size()) - 1;
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) {
      chosen = static_cast<int>(i);
      break;
    }
  }
  // never return a zero-probability trailing action on round-off
  while (chosen > 0 && probs[chosen] <= 0.0) --chosen;
  return {chosen, std::log(probs[chosen])};
}

int argmax_action(const Eigen::VectorXd& probs) {
  int best = 0;
  for (Eigen::Index i = 1; i < probs.size(); ++i) {
    if (probs[i] > probs[best]) best = static_cast<int>(i);
  }
  return best;
}

int act_greedy(const PolicyParams& params, std::span<const double> obs) {
  return argmax_action(forward_policy(params, obs).probs);
}

PolicyParams aggregate_shared_policy(std::span<const PolicyParams> per_agent) {
  if (per_agent.empty()) throw ContractError("aggregate_shared_policy: no inputs");
  for (const auto& p : per_agent) {
    if (!same_shape(p, per_agent.front())) {
      throw ContractError("aggregate_shared_policy: parameter shapes differ");
    }
  }
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(num_params(per_agent.front())));
  for (const auto& p : per_agent) sum += flatten(p);
  PolicyParams out = per_agent.front();
  unflatten(out, sum / static_cast<double>(per_agent.size()));
  return out;
}

}  // namespace fsho::hmarl
