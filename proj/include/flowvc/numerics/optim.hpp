#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "flowvc/numerics/tensor.hpp"

namespace flowvc::num {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t step = 0;
};

/// One AdamW update (decoupled weight decay):
///   p <- p * (1 - lr*wd)
///   m <- b1*m + (1-b1)*g,  v <- b2*v + (1-b2)*g^2
///   p <- p - lr * mhat / (sqrt(vhat) + eps),  with bias-corrected mhat, vhat.
void adam_step(std::span<double> param, std::span<const double> grad, AdamState& state, const AdamConfig& cfg);

/// AdamW over a fixed, ordered parameter list.
class AdamW {
 public:
  AdamW(std::vector<Tensor> params, AdamConfig cfg);

  /// Applies one update from the parameters' accumulated gradients.
  void step();
  void zero_grad();

  const AdamConfig& config() const { return cfg_; }
  /// For learning-rate schedules; takes effect at the next step.
  void set_lr(double lr);
  std::vector<AdamState>& states() { return states_; }
  const std::vector<AdamState>& states() const { return states_; }
  const std::vector<Tensor>& params() const { return params_; }

 private:
  std::vector<Tensor> params_;
  std::vector<AdamState> states_;
  AdamConfig cfg_;
};

}  // namespace flowvc::num
