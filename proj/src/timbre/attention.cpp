#include "flowvc/timbre/attention.hpp"

#include <cmath>

#include "flowvc/errors.hpp"

namespace flowvc::timbre {

using num::Tensor;

Tensor film_apply(const Tensor& h, const TimbreCondition& cond) {
  const std::size_t channels = h.ndim() == 1 ? h.numel() : h.rows();
  if (channels != cond.dim() || cond.beta.numel() != cond.dim()) {
    throw InputError("film_apply: feature dim " + std::to_string(channels) + " vs condition dim " +
                     std::to_string(cond.dim()));
  }
  if (h.ndim() == 1) return h * cond.gamma + cond.beta;
  return num::add_per_row(num::mul_per_row(h, cond.gamma), cond.beta);
}

MultiHeadAttention MultiHeadAttention::init(std::size_t dim, std::size_t heads, num::Rng& rng) {
  if (heads == 0 || dim % heads != 0) throw InputError("attention: model dim must be divisible by head count");
  return {num::Linear::init(dim, dim, rng), num::Linear::init(dim, dim, rng), num::Linear::init(dim, dim, rng),
          num::Linear::init(dim, dim, rng), heads};
}

Tensor MultiHeadAttention::operator()(const Tensor& q_seq, const Tensor& kv_seq, std::vector<Tensor>* weights) const {
  if (kv_seq.ndim() != 2 || kv_seq.cols() == 0) throw InputError("attention: empty key sequence");
  const Tensor q = query(q_seq), k = key(kv_seq), v = value(kv_seq);
  const std::size_t d = q.rows() / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(d));
  std::vector<Tensor> parts;
  parts.reserve(heads);
  if (weights) weights->clear();
  for (std::size_t h = 0; h < heads; ++h) {
    const Tensor qh = num::slice_rows(q, h * d, (h + 1) * d);
    const Tensor kh = num::slice_rows(k, h * d, (h + 1) * d);
    const Tensor vh = num::slice_rows(v, h * d, (h + 1) * d);
    const Tensor attn = num::softmax(num::scale(num::matmul(num::transpose(kh), qh), inv_sqrt), 0);
    if (weights) weights->push_back(attn);
    parts.push_back(num::matmul(vh, attn));
  }
  return output(num::concat_rows(parts));
}

void MultiHeadAttention::visit_parameters(const std::string& prefix, const num::ParamVisitor& fn) {
  query.visit_parameters(num::join_name(prefix, "q"), fn);
  key.visit_parameters(num::join_name(prefix, "k"), fn);
  value.visit_parameters(num::join_name(prefix, "v"), fn);
  output.visit_parameters(num::join_name(prefix, "o"), fn);
}

SelfAttentionBlock SelfAttentionBlock::init(std::size_t dim, std::size_t heads, std::size_t groups, num::Rng& rng) {
  if (groups == 0 || dim % groups != 0) throw InputError("self-attention block: dim must be divisible by groups");
  SelfAttentionBlock b;
  b.norm = num::NormAffine::init(dim);
  b.groups = groups;
  b.attention = MultiHeadAttention::init(dim, heads, rng);
  b.conv = num::Conv1d::init(dim, dim, 1, rng, 1, 0, 0.5);
  return b;
}

Tensor SelfAttentionBlock::operator()(const Tensor& x) const {
  const Tensor n = num::group_norm(x, groups, norm.gamma, norm.beta);
  return x + conv(attention(n, n));
}

void SelfAttentionBlock::visit_parameters(const std::string& prefix, const num::ParamVisitor& fn) {
  norm.visit_parameters(num::join_name(prefix, "norm"), fn);
  attention.visit_parameters(num::join_name(prefix, "attn"), fn);
  conv.visit_parameters(num::join_name(prefix, "conv"), fn);
}

CrossAttentionBlock CrossAttentionBlock::init(std::size_t dim, std::size_t heads, std::size_t ffn_dim, num::Rng& rng) {
  CrossAttentionBlock b;
  b.attention = MultiHeadAttention::init(dim, heads, rng);
  b.norm1 = num::NormAffine::init(dim);
  b.ffn_in = num::Linear::init(dim, ffn_dim, rng);
  b.ffn_out = num::Linear::init(ffn_dim, dim, rng);
  b.norm2 = num::NormAffine::init(dim);
  return b;
}

Tensor CrossAttentionBlock::operator()(const Tensor& q_seq, const Tensor& kv_seq, std::vector<Tensor>* weights) const {
  const Tensor y = num::layer_norm(q_seq + attention(q_seq, kv_seq, weights), norm1.gamma, norm1.beta);
  return num::layer_norm(y + ffn_out(num::silu(ffn_in(y))), norm2.gamma, norm2.beta);
}

void CrossAttentionBlock::visit_parameters(const std::string& prefix, const num::ParamVisitor& fn) {
  attention.visit_parameters(num::join_name(prefix, "attn"), fn);
  norm1.visit_parameters(num::join_name(prefix, "norm1"), fn);
  ffn_in.visit_parameters(num::join_name(prefix, "ffn_in"), fn);
  ffn_out.visit_parameters(num::join_name(prefix, "ffn_out"), fn);
  norm2.visit_parameters(num::join_name(prefix, "norm2"), fn);
}

Tensor cross_attention(const Tensor& q_seq, const Tensor& kv_seq, const CrossAttentionBlock& block,
                       std::vector<Tensor>* weights) {
  return block(q_seq, kv_seq, weights);
}

}  // namespace flowvc::timbre
