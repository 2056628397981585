#pragma once

#include <cstddef>
#include <functional>

#include "flowvc/numerics/random.hpp"
#include "flowvc/numerics/tensor.hpp"
#include "flowvc/timbre/attention.hpp"

namespace flowvc::cfm {

using num::Tensor;

inline constexpr double kDefaultSigmaMin = 1e-4;
inline constexpr std::size_t kDefaultSteps = 10;
inline constexpr double kDefaultGuidance = 0.7;
inline constexpr double kDefaultDropProb = 0.2;

struct FlowPathParams {
  double sigma_min = kDefaultSigmaMin;
};

/// Conditions of the vector field. When `active` is false the field
/// substitutes its learned null conditions.
struct ConditionSet {
  Tensor fused;                     // [D_f x T], may be undefined for unconditional fields
  timbre::TimbreCondition timbre;   // may be undefined
  bool active = true;

  ConditionSet nulled() const {
    ConditionSet c = *this;
    c.active = false;
    return c;
  }
};

class VectorField {
 public:
  virtual ~VectorField() = default;
  /// v_t(x, t, h), same shape as x.
  virtual Tensor operator()(const Tensor& x, double t, const ConditionSet& h) const = 0;
};

/// Adapter for analytic fields.
class FunctionField final : public VectorField {
 public:
  using Fn = std::function<Tensor(const Tensor&, double, const ConditionSet&)>;
  explicit FunctionField(Fn fn) : fn_(std::move(fn)) {}
  Tensor operator()(const Tensor& x, double t, const ConditionSet& h) const override { return fn_(x, t, h); }

 private:
  Fn fn_;
};

/// (1 - (1 - sigma_min) t) x0 + t x1: noise at t = 0, data at t = 1.
Tensor ot_path(const Tensor& x0, const Tensor& x1, double t, const FlowPathParams& p = {});
/// x1 - (1 - sigma_min) x0, the time derivative of ot_path.
Tensor ot_target(const Tensor& x0, const Tensor& x1, const FlowPathParams& p = {});

/// ||ot_target - v_t(ot_path, t, h)||^2 averaged over elements, for given t and x0.
Tensor cfm_loss_at(const Tensor& x1, const Tensor& x0, double t, const ConditionSet& h, const VectorField& net,
                   const FlowPathParams& p = {});

struct CfmDraw {
  Tensor loss;
  double t = 0.0;
  bool dropped = false;
};

/// Draws t ~ U(0,1), x0 ~ N(0, I) and, with probability p_drop, nulls the
/// condition; returns the regression loss.
CfmDraw cfm_loss(const Tensor& x1, const ConditionSet& h, const VectorField& net, const FlowPathParams& p, num::Rng& rng,
                 double p_drop = kDefaultDropProb);

struct SamplerConfig {
  std::size_t steps = kDefaultSteps;
  double guidance = kDefaultGuidance;

  void validate() const;
};

/// (1 + gamma) v_cond - gamma v_uncond
Tensor cfg_combine(const Tensor& v_cond, const Tensor& v_uncond, double gamma);

/// Forward Euler from x0 over K uniform steps, t_k = k / K, with guided
/// velocities. gamma = 0 evaluates the conditional field only.
Tensor euler_integrate(const Tensor& x0, const ConditionSet& h, const VectorField& net, const SamplerConfig& cfg);
/// x0 ~ N(0, I) of the given shape drawn from rng, then euler_integrate.
Tensor euler_sample(const ConditionSet& h, const VectorField& net, const SamplerConfig& cfg, num::Rng& rng,
                    const num::Shape& shape);

}  // namespace flowvc::cfm
