#include "flowvc/cfm/flow.hpp"

#include <string>

#include "flowvc/errors.hpp"
#include "flowvc/numerics/ops.hpp"

namespace flowvc::cfm {

namespace {
void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw InputError(std::string(what) + ": shape mismatch " + num::shape_str(a.shape()) + " vs " +
                     num::shape_str(b.shape()));
  }
}
}  // namespace

Tensor ot_path(const Tensor& x0, const Tensor& x1, double t, const FlowPathParams& p) {
  if (!(t >= 0.0 && t <= 1.0)) throw InputError("ot_path: t must lie in [0, 1], got " + std::to_string(t));
  require_same_shape(x0, x1, "ot_path");
  return num::scale(x0, 1.0 - (1.0 - p.sigma_min) * t) + num::scale(x1, t);
}

Tensor ot_target(const Tensor& x0, const Tensor& x1, const FlowPathParams& p) {
  require_same_shape(x0, x1, "ot_target");
  return x1 - num::scale(x0, 1.0 - p.sigma_min);
}

Tensor cfm_loss_at(const Tensor& x1, const Tensor& x0, double t, const ConditionSet& h, const VectorField& net,
                   const FlowPathParams& p) {
  const Tensor target = ot_target(x0, x1, p).detach();
  return num::mse(net(ot_path(x0, x1, t, p).detach(), t, h), target);
}

CfmDraw cfm_loss(const Tensor& x1, const ConditionSet& h, const VectorField& net, const FlowPathParams& p, num::Rng& rng,
                 double p_drop) {
  CfmDraw d;
  d.t = num::uniform01(rng);
  const Tensor x0 = num::normal_tensor(x1.shape(), 1.0, rng);
  d.dropped = num::uniform01(rng) < p_drop;
  d.loss = cfm_loss_at(x1, x0, d.t, d.dropped ? h.nulled() : h, net, p);
  return d;
}

void SamplerConfig::validate() const {
  if (steps == 0) throw InputError("sampler: steps must be at least 1");
  if (!(guidance >= 0.0)) throw InputError("sampler: guidance must be non-negative");
}

Tensor cfg_combine(const Tensor& v_cond, const Tensor& v_uncond, double gamma) {
  require_same_shape(v_cond, v_uncond, "cfg_combine");
  if (gamma == 0.0) return v_cond;
  // (1 + gamma) v_cond - gamma v_uncond, arranged to be exact when both agree.
  return v_cond + num::scale(v_cond - v_uncond, gamma);
}

Tensor euler_integrate(const Tensor& x0, const ConditionSet& h, const VectorField& net, const SamplerConfig& cfg) {
  cfg.validate();
  num::NoGradGuard guard;
  const double dt = 1.0 / static_cast<double>(cfg.steps);
  const ConditionSet uncond = h.nulled();
  Tensor x = x0.detach();
  for (std::size_t k = 0; k < cfg.steps; ++k) {
    const double t = static_cast<double>(k) * dt;
    Tensor v = net(x, t, h);
    if (cfg.guidance != 0.0) v = cfg_combine(v, net(x, t, uncond), cfg.guidance);
    x = x + num::scale(v, dt);
  }
  return x;
}

Tensor euler_sample(const ConditionSet& h, const VectorField& net, const SamplerConfig& cfg, num::Rng& rng,
                    const num::Shape& shape) {
  return euler_integrate(num::normal_tensor(shape, 1.0, rng), h, net, cfg);
}

}  // namespace flowvc::cfm
