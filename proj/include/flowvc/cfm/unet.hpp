#pragma once

#include <cstddef>
#include <vector>

#include "flowvc/cfm/flow.hpp"
#include "flowvc/numerics/layers.hpp"

namespace flowvc::cfm {

/// Sinusoidal features of t * scale: [sin(w_i t'), cos(w_i t')] with
/// w_i = 10000^(-i / (dim/2)), i < dim/2.
Tensor time_features(double t, std::size_t dim, double scale = 1000.0);

struct UNetConfig {
  std::size_t n_mels = 80;
  std::size_t fused_dim = 128;
  std::size_t hidden = 128;
  std::size_t levels = 3;
  std::size_t res_blocks = 2;
  std::size_t time_dim = 128;
  std::size_t groups = 8;
};

/// GroupNorm -> FiLM -> SiLU -> conv(K3) -> + time bias -> GroupNorm -> FiLM
/// -> SiLU -> conv(K3), plus the identity shortcut.
struct ResBlock {
  num::NormAffine norm1;
  num::Conv1d conv1;
  num::Linear time_proj;
  num::NormAffine norm2;
  num::Conv1d conv2;
  std::size_t groups = 1;

  static ResBlock init(std::size_t channels, std::size_t time_dim, std::size_t groups, num::Rng& rng);
  Tensor operator()(const Tensor& x, const Tensor& temb, const timbre::TimbreCondition& film) const;
  void visit_parameters(const std::string& prefix, const num::ParamVisitor& fn);
};

/// 1-D U-Net over time at constant width: stride-2 conv downsampling,
/// linear-interpolation upsampling with concatenated skips (merged by a K=1
/// conv). Input is the state [n_mels x T] stacked over the fused condition
/// [fused_dim x T]; the timbre condition modulates every block as FiLM.
class VectorFieldNet final : public VectorField {
 public:
  static VectorFieldNet init(const UNetConfig& cfg, num::Rng& rng);

  Tensor operator()(const Tensor& x, double t, const ConditionSet& h) const override;
  void visit_parameters(const std::string& prefix, const num::ParamVisitor& fn);
  const UNetConfig& config() const { return cfg_; }

 private:
  UNetConfig cfg_;
  num::Conv1d conv_in_;
  num::Linear time_in_;
  num::Linear time_out_;
  std::vector<std::vector<ResBlock>> down_;
  std::vector<num::Conv1d> downsample_;
  std::vector<ResBlock> mid_;
  std::vector<num::Conv1d> merge_;
  std::vector<std::vector<ResBlock>> up_;
  num::NormAffine norm_out_;
  num::Conv1d conv_out_;
  Tensor null_fused_;  // [fused_dim]
  Tensor null_gamma_;  // [hidden]
  Tensor null_beta_;   // [hidden]
};

/// Per-column MLP field for low-dimensional toy data: x [D x N] holds N points.
class MlpField final : public VectorField {
 public:
  static MlpField init(std::size_t dim, std::size_t hidden, std::size_t time_dim, num::Rng& rng);
  Tensor operator()(const Tensor& x, double t, const ConditionSet& h) const override;
  void visit_parameters(const std::string& prefix, const num::ParamVisitor& fn);

 private:
  std::size_t time_dim_ = 0;
  num::Linear in_;
  num::Linear hidden1_;
  num::Linear hidden2_;
  num::Linear out_;
};

}  // namespace flowvc::cfm
