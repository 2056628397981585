#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "flowvc/numerics/ops.hpp"
#include "flowvc/numerics/random.hpp"

namespace flowvc::num {

/// Called once per parameter with its hierarchical name ("block0.attn.q.weight").
using ParamVisitor = std::function<void(const std::string& name, Tensor& param)>;

inline std::string join_name(const std::string& prefix, const std::string& name) {
  return prefix.empty() ? name : prefix + "." + name;
}

/// Collects parameters in visiting order.
template <typename Module>
std::vector<Tensor> parameters_of(Module& m) {
  std::vector<Tensor> out;
  m.visit_parameters("", [&out](const std::string&, Tensor& p) { out.push_back(p); });
  return out;
}

/// Affine map over channels: x [in x T] -> W x + b, [out x T]. A 1-D input
/// [in] yields a 1-D output [out].
struct Linear {
  Tensor weight;  // [out x in]
  Tensor bias;    // [out]

  static Linear init(std::size_t in, std::size_t out, Rng& rng, double gain = 1.0);
  Tensor operator()(const Tensor& x) const;
  std::size_t in_features() const { return weight.dim(1); }
  std::size_t out_features() const { return weight.dim(0); }
  void visit_parameters(const std::string& prefix, const ParamVisitor& fn);
};

struct Conv1d {
  Tensor weight;  // [out x in x K]
  Tensor bias;    // [out]
  std::size_t stride = 1;
  std::size_t padding = 0;

  static Conv1d init(std::size_t in, std::size_t out, std::size_t kernel, Rng& rng, std::size_t stride = 1,
                     std::size_t padding = 0, double gain = 1.0);
  Tensor operator()(const Tensor& x) const;
  void visit_parameters(const std::string& prefix, const ParamVisitor& fn);
};

/// Per-channel affine of a normalization layer (gamma = 1, beta = 0 at init).
struct NormAffine {
  Tensor gamma;
  Tensor beta;

  static NormAffine init(std::size_t channels);
  void visit_parameters(const std::string& prefix, const ParamVisitor& fn);
};

}  // namespace flowvc::num
