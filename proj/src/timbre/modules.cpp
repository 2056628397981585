#include "flowvc/timbre/modules.hpp"

#include "flowvc/errors.hpp"

namespace flowvc::timbre {

using num::Tensor;

MemoryAugment MemoryAugment::init(const MemoryConfig& cfg, num::Rng& rng) {
  MemoryAugment m;
  m.projection = num::Conv1d::init(cfg.input_dim, cfg.hidden, 1, rng);
  for (std::size_t i = 0; i < cfg.blocks; ++i) m.blocks.push_back(SelfAttentionBlock::init(cfg.hidden, cfg.heads, cfg.groups, rng));
  m.film_gamma = num::Linear::init(cfg.hidden, cfg.condition_dim, rng, 0.1);
  m.film_beta = num::Linear::init(cfg.hidden, cfg.condition_dim, rng, 0.1);
  return m;
}

Tensor MemoryAugment::pooled(const Tensor& x) const {
  Tensor h = projection(x);
  for (const auto& block : blocks) h = block(h);
  return num::mean_cols(h);
}

TimbreCondition MemoryAugment::operator()(const TimbreSequence& x) const {
  if (x.width() != projection.weight.dim(1)) throw InputError("memory module: timbre width mismatch");
  const Tensor p = pooled(x.frames);
  // gamma is centred on 1 so an untrained head leaves features unscaled.
  return {num::add_scalar(film_gamma(p), 1.0), film_beta(p)};
}

void MemoryAugment::visit_parameters(const std::string& prefix, const num::ParamVisitor& fn) {
  projection.visit_parameters(num::join_name(prefix, "proj"), fn);
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    blocks[i].visit_parameters(num::join_name(prefix, "block" + std::to_string(i)), fn);
  }
  film_gamma.visit_parameters(num::join_name(prefix, "film_gamma"), fn);
  film_beta.visit_parameters(num::join_name(prefix, "film_beta"), fn);
}

TimbreCondition memory_augment(const TimbreSequence& x, const MemoryAugment& params) { return params(x); }

ContextAwareFusion ContextAwareFusion::init(const ContextConfig& cfg, num::Rng& rng) {
  ContextAwareFusion c;
  c.content_proj = num::Linear::init(cfg.content_dim, cfg.model_dim, rng);
  c.timbre_proj = num::Linear::init(cfg.timbre_dim, cfg.model_dim, rng);
  for (std::size_t i = 0; i < cfg.blocks; ++i) {
    c.blocks.push_back(CrossAttentionBlock::init(cfg.model_dim, cfg.heads, cfg.ffn_dim, rng));
  }
  return c;
}

Tensor ContextAwareFusion::attend(const Tensor& content, const Tensor& timbre, std::vector<Tensor>* weights) const {
  if (content.rows() != content_proj.in_features() || timbre.rows() != timbre_proj.in_features()) {
    throw InputError("context-aware fusion: input dimension mismatch");
  }
  const Tensor kv = timbre_proj(timbre);
  Tensor q = content_proj(content);
  std::vector<Tensor> layer_weights;
  if (weights) weights->clear();
  for (const auto& block : blocks) {
    q = block(q, kv, weights ? &layer_weights : nullptr);
    if (weights) weights->insert(weights->end(), layer_weights.begin(), layer_weights.end());
  }
  return q;
}

void ContextAwareFusion::visit_parameters(const std::string& prefix, const num::ParamVisitor& fn) {
  content_proj.visit_parameters(num::join_name(prefix, "content_proj"), fn);
  timbre_proj.visit_parameters(num::join_name(prefix, "timbre_proj"), fn);
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    blocks[i].visit_parameters(num::join_name(prefix, "block" + std::to_string(i)), fn);
  }
}

FusedSequence context_aware_fuse(const Tensor& content, const TimbreSequence& timbre, std::size_t t_mel,
                                 const ContextAwareFusion& params) {
  if (t_mel == 0) throw InputError("context-aware fusion: target length must be positive");
  return {num::interpolate_time(params.attend(content, timbre.frames), t_mel)};
}

}  // namespace flowvc::timbre
