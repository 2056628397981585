#include "flowvc/content/fusion.hpp"

#include "flowvc/errors.hpp"

namespace flowvc::content {

AdaptiveFusion AdaptiveFusion::init(std::size_t d_ssl, std::size_t hidden, std::size_t d_p, num::Rng& rng) {
  AdaptiveFusion f;
  f.first = num::Conv1d::init(d_ssl, hidden, 3, rng, 1, 1);
  f.second = num::Conv1d::init(hidden, d_p, 3, rng, 1, 1, 0.5);
  f.second.bias = num::Tensor::full({d_p}, 1.0, true);
  return f;
}

num::Tensor AdaptiveFusion::coefficients(const num::Tensor& quantized) const {
  return num::leaky_relu(second(first(quantized)), kFusionSlope);
}

void AdaptiveFusion::visit_parameters(const std::string& prefix, const num::ParamVisitor& fn) {
  first.visit_parameters(num::join_name(prefix, "conv0"), fn);
  second.visit_parameters(num::join_name(prefix, "conv1"), fn);
}

ContentSequence apply_coefficients(const num::Tensor& coefficients, const num::Tensor& ppg) {
  if (coefficients.rows() != ppg.rows()) {
    throw InputError("adaptive fusion: projected dim " + std::to_string(coefficients.rows()) +
                     " does not match PPG dim " + std::to_string(ppg.rows()));
  }
  return {num::interpolate_time(coefficients, ppg.cols()) * ppg};
}

ContentSequence adaptive_fuse(const QuantizedSequence& q, const FeatureSequence& ppg, const AdaptiveFusion& fusion) {
  return apply_coefficients(fusion.coefficients(q.vectors), ppg.frames);
}

}  // namespace flowvc::content
