#include "flowvc/numerics/optim.hpp"

#include <cmath>

namespace flowvc::num {

void adam_step(std::span<double> param, std::span<const double> grad, AdamState& state, const AdamConfig& cfg) {
  if (grad.size() != param.size()) throw TensorError("adam_step: gradient and parameter sizes differ");
  if (!(cfg.lr > 0.0)) throw TensorError("adam_step: learning rate must be positive");
  if (state.m.empty()) {
    state.m.assign(param.size(), 0.0);
    state.v.assign(param.size(), 0.0);
  }
  if (state.m.size() != param.size() || state.v.size() != param.size()) {
    throw TensorError("adam_step: optimizer state does not match parameter size");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(cfg.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.beta2, t);
  const double decay = 1.0 - cfg.lr * cfg.weight_decay;
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad[i];
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
    const double mhat = state.m[i] / bc1;
    const double vhat = state.v[i] / bc2;
    param[i] = param[i] * decay - cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
  }
}

AdamW::AdamW(std::vector<Tensor> params, AdamConfig cfg)
    : params_(std::move(params)), states_(params_.size()), cfg_(cfg) {}

void AdamW::step() {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = params_[i];
    if (!p.requires_grad()) continue;
    const auto g = p.grad();
    adam_step(p.mutable_data(), g, states_[i], cfg_);
  }
}

void AdamW::zero_grad() { num::zero_grad(params_); }

void AdamW::set_lr(double lr) {
  if (!(lr > 0.0)) throw TensorError("AdamW: learning rate must be positive");
  cfg_.lr = lr;
}

}  // namespace flowvc::num
