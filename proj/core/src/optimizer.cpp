#include "spxnet/optimizer.hpp"

#include <cmath>

#include "spxnet/errors.hpp"

namespace spxnet {

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (!(base_lr >= 0.0)) throw ConfigError("base_lr must be >= 0");
  if (!(decay > 0.0)) throw ConfigError("decay must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("adam betas must lie in [0, 1)");
  }
  if (!(adam_eps > 0.0)) throw ConfigError("adam_eps must be > 0");
  for (std::size_t i = 0; i < milestones.size(); ++i) {
    if (milestones[i] < 1 || milestones[i] >= epochs) {
      throw ConfigError("milestone " + std::to_string(milestones[i]) + " outside [1, epochs)");
    }
    if (i > 0 && milestones[i] <= milestones[i - 1]) throw ConfigError("milestones must be strictly increasing");
  }
  for (double w : scale_weights) {
    if (!(w > 0.0)) throw ConfigError("scale weights must be positive");
  }
  if (checkpoint_every < 0) throw ConfigError("checkpoint_every must be >= 0");
}

double lr_at(int epoch, const TrainConfig& cfg) {
  double lr = cfg.base_lr;
  for (int m : cfg.milestones) {
    if (m <= epoch) lr *= cfg.decay;
  }
  return lr;
}

OptimizerState OptimizerState::for_parameters(std::span<const Tensor> params) {
  OptimizerState state;
  for (const auto& p : params) {
    state.m.push_back(Tensor::zeros(p.shape()));
    state.v.push_back(Tensor::zeros(p.shape()));
  }
  return state;
}

void adam_step(std::span<const Tensor> params, OptimizerState& state, double lr, const TrainConfig& cfg) {
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw ShapeError("optimizer state holds " + std::to_string(state.m.size()) + " moments for " +
                     std::to_string(params.size()) + " parameters");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (state.m[i].shape() != params[i].shape() || state.v[i].shape() != params[i].shape()) {
      throw ShapeError("optimizer moment shape mismatch for parameter " + std::to_string(i));
    }
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor p = params[i];
    auto w = p.mutable_data();
    auto m = state.m[i].mutable_data();
    auto v = state.v[i].mutable_data();
    const auto g = p.grad();
    for (std::size_t k = 0; k < w.size(); ++k) {
      const double gk = g.empty() ? 0.0 : g[k];
      const double mk = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * gk;
      const double vk = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * gk * gk;
      m[k] = static_cast<float>(mk);
      v[k] = static_cast<float>(vk);
      w[k] = static_cast<float>(w[k] - lr * (mk / c1) / (std::sqrt(vk / c2) + cfg.adam_eps));
    }
  }
}

}  // namespace spxnet
