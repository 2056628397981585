#include "flowvc/numerics/layers.hpp"

#include <cmath>

namespace flowvc::num {

Linear Linear::init(std::size_t in, std::size_t out, Rng& rng, double gain) {
  Linear l;
  l.weight = normal_tensor({out, in}, gain / std::sqrt(static_cast<double>(in)), rng, true);
  l.bias = Tensor::zeros({out}, true);
  return l;
}

Tensor Linear::operator()(const Tensor& x) const {
  if (x.ndim() == 1) return reshape(add_per_row(matmul(weight, reshape(x, {x.numel(), 1})), bias), {out_features()});
  return add_per_row(matmul(weight, x), bias);
}

void Linear::visit_parameters(const std::string& prefix, const ParamVisitor& fn) {
  fn(join_name(prefix, "weight"), weight);
  fn(join_name(prefix, "bias"), bias);
}

Conv1d Conv1d::init(std::size_t in, std::size_t out, std::size_t kernel, Rng& rng, std::size_t stride,
                    std::size_t padding, double gain) {
  Conv1d c;
  c.weight = normal_tensor({out, in, kernel}, gain / std::sqrt(static_cast<double>(in * kernel)), rng, true);
  c.bias = Tensor::zeros({out}, true);
  c.stride = stride;
  c.padding = padding;
  return c;
}

Tensor Conv1d::operator()(const Tensor& x) const { return conv1d(x, weight, bias, stride, padding); }

void Conv1d::visit_parameters(const std::string& prefix, const ParamVisitor& fn) {
  fn(join_name(prefix, "weight"), weight);
  fn(join_name(prefix, "bias"), bias);
}

NormAffine NormAffine::init(std::size_t channels) {
  return NormAffine{Tensor::full({channels}, 1.0, true), Tensor::zeros({channels}, true)};
}

void NormAffine::visit_parameters(const std::string& prefix, const ParamVisitor& fn) {
  fn(join_name(prefix, "gamma"), gamma);
  fn(join_name(prefix, "beta"), beta);
}

}  // namespace flowvc::num
