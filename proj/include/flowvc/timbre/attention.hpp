#pragma once

#include <cstddef>
#include <vector>

#include "flowvc/numerics/layers.hpp"

namespace flowvc::timbre {

/// FiLM parameters for hidden width C: gamma [C], beta [C].
struct TimbreCondition {
  num::Tensor gamma;
  num::Tensor beta;

  std::size_t dim() const { return gamma.numel(); }
};

/// gamma * h + beta per channel of h [C x T] (or [C]).
num::Tensor film_apply(const num::Tensor& h, const TimbreCondition& cond);

/// Scaled dot-product attention with H heads. Sequences are channel-major
/// [D x T]; head h uses rows [h*d, (h+1)*d) of each projection.
struct MultiHeadAttention {
  num::Linear query;
  num::Linear key;
  num::Linear value;
  num::Linear output;
  std::size_t heads = 1;

  static MultiHeadAttention init(std::size_t dim, std::size_t heads, num::Rng& rng);
  /// Optional `weights` receives one [T_k x T_q] matrix per head; each column
  /// is a softmax over keys.
  num::Tensor operator()(const num::Tensor& q_seq, const num::Tensor& kv_seq,
                         std::vector<num::Tensor>* weights = nullptr) const;
  void visit_parameters(const std::string& prefix, const num::ParamVisitor& fn);
};

/// Pre-norm self-attention block: x + Conv1d_k1(MHSA(GroupNorm(x))).
struct SelfAttentionBlock {
  num::NormAffine norm;
  std::size_t groups = 1;
  MultiHeadAttention attention;
  num::Conv1d conv;

  static SelfAttentionBlock init(std::size_t dim, std::size_t heads, std::size_t groups, num::Rng& rng);
  num::Tensor operator()(const num::Tensor& x) const;
  void visit_parameters(const std::string& prefix, const num::ParamVisitor& fn);
};

/// Post-norm cross-attention block:
/// y = LN(q + MHA(q, kv)); out = LN(y + FFN(y)), FFN = Linear -> SiLU -> Linear.
struct CrossAttentionBlock {
  MultiHeadAttention attention;
  num::NormAffine norm1;
  num::Linear ffn_in;
  num::Linear ffn_out;
  num::NormAffine norm2;

  static CrossAttentionBlock init(std::size_t dim, std::size_t heads, std::size_t ffn_dim, num::Rng& rng);
  num::Tensor operator()(const num::Tensor& q_seq, const num::Tensor& kv_seq,
                         std::vector<num::Tensor>* weights = nullptr) const;
  void visit_parameters(const std::string& prefix, const num::ParamVisitor& fn);
};

num::Tensor cross_attention(const num::Tensor& q_seq, const num::Tensor& kv_seq, const CrossAttentionBlock& block,
                            std::vector<num::Tensor>* weights = nullptr);

}  // namespace flowvc::timbre
