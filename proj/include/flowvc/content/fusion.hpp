#pragma once

#include <cstddef>

#include "flowvc/content/providers.hpp"
#include "flowvc/content/rvq.hpp"
#include "flowvc/numerics/layers.hpp"

namespace flowvc::content {

inline constexpr double kFusionSlope = 0.2;

/// X_s_cont, channel-major [D_p x T_p].
struct ContentSequence {
  num::Tensor frames;

  std::size_t length() const { return frames.cols(); }
};

/// Projection of quantized SSL features into per-symbol coefficients:
/// conv(K=3, pad 1) -> conv(K=3, pad 1) -> LeakyReLU(0.2).
struct AdaptiveFusion {
  num::Conv1d first;
  num::Conv1d second;

  static AdaptiveFusion init(std::size_t d_ssl, std::size_t hidden, std::size_t d_p, num::Rng& rng);
  /// [D_ssl x T_ssl] -> [D_p x T_ssl]
  num::Tensor coefficients(const num::Tensor& quantized) const;
  void visit_parameters(const std::string& prefix, const num::ParamVisitor& fn);
};

/// Resamples coefficients [D_p x T_ssl] to the PPG length and multiplies
/// element-wise with the PPG [D_p x T_p].
ContentSequence apply_coefficients(const num::Tensor& coefficients, const num::Tensor& ppg);

ContentSequence adaptive_fuse(const QuantizedSequence& q, const FeatureSequence& ppg, const AdaptiveFusion& fusion);

}  // namespace flowvc::content
