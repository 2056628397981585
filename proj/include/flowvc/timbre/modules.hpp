#pragma once

#include <cstddef>
#include <vector>

#include "flowvc/timbre/attention.hpp"
#include "flowvc/timbre/speaker.hpp"

namespace flowvc::timbre {

struct MemoryConfig {
  std::size_t input_dim = 80 + kSpeakerDim;
  std::size_t hidden = 64;
  std::size_t heads = 4;
  std::size_t groups = 8;
  std::size_t blocks = 4;
  std::size_t condition_dim = 128;
};

/// Memory-augmented timbre module: K=1 conv projection, stacked self-attention
/// blocks, mean over time, FiLM head. No positional information is used, so
/// the result does not depend on frame order.
struct MemoryAugment {
  num::Conv1d projection;
  std::vector<SelfAttentionBlock> blocks;
  num::Linear film_gamma;
  num::Linear film_beta;

  static MemoryAugment init(const MemoryConfig& cfg, num::Rng& rng);
  /// Pooled hidden state [hidden] after the blocks.
  num::Tensor pooled(const num::Tensor& x) const;
  TimbreCondition operator()(const TimbreSequence& x) const;
  void visit_parameters(const std::string& prefix, const num::ParamVisitor& fn);
};

TimbreCondition memory_augment(const TimbreSequence& x, const MemoryAugment& params);

/// X_s_ct_t, channel-major [D_f x T_mel].
struct FusedSequence {
  num::Tensor frames;

  std::size_t length() const { return frames.cols(); }
};

struct ContextConfig {
  std::size_t content_dim = 12;
  std::size_t timbre_dim = 80 + kSpeakerDim;
  std::size_t model_dim = 128;
  std::size_t heads = 4;
  std::size_t blocks = 2;
  std::size_t ffn_dim = 256;
};

/// Context-aware timbre module: content frames query the timbre frames.
struct ContextAwareFusion {
  num::Linear content_proj;
  num::Linear timbre_proj;
  std::vector<CrossAttentionBlock> blocks;

  static ContextAwareFusion init(const ContextConfig& cfg, num::Rng& rng);
  /// [model_dim x T_p], before temporal interpolation.
  num::Tensor attend(const num::Tensor& content, const num::Tensor& timbre,
                     std::vector<num::Tensor>* weights = nullptr) const;
  std::size_t model_dim() const { return content_proj.out_features(); }
  void visit_parameters(const std::string& prefix, const num::ParamVisitor& fn);
};

/// Output length is exactly t_mel.
FusedSequence context_aware_fuse(const num::Tensor& content, const TimbreSequence& timbre, std::size_t t_mel,
                                 const ContextAwareFusion& params);

}  // namespace flowvc::timbre
