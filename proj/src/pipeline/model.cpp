#include "flowvc/pipeline/model.hpp"

#include <cmath>
#include <set>

#include "flowvc/errors.hpp"
#include "flowvc/numerics/ops.hpp"

namespace flowvc::pipeline {

namespace {

content::PpgConfig ppg_config(const RunConfig& c) {
  return {c.dims.n_symbols, c.dims.ppg_smoothing, c.dims.ppg_hop, c.mel.sample_rate};
}

content::SslConfig ssl_config(const RunConfig& c) {
  return {c.mel.n_mels, c.dims.ssl_hidden, c.dims.ssl_dim, c.seeds.ssl};
}

}  // namespace

Model::Model(const RunConfig& cfg)
    : cfg_(cfg),
      ppg_(ppg_config(cfg)),
      ssl_(ssl_config(cfg)),
      embedder_(cfg.seeds.speaker, cfg.dims.speaker_dim, cfg.mel) {}

Model Model::init(const RunConfig& cfg) {
  cfg.validate();
  Model m(cfg);
  const auto& d = cfg.dims;
  const std::size_t timbre_width = cfg.mel.n_mels + d.speaker_dim;

  auto rvq_rng = num::make_rng(cfg.seeds.model, {1});
  for (std::size_t s = 0; s < cfg.rvq.stages; ++s) {
    m.codebooks_.push_back(content::Codebook::init(cfg.rvq.size, d.ssl_dim, rvq_rng));
  }
  auto fusion_rng = num::make_rng(cfg.seeds.model, {2});
  m.fusion_ = content::AdaptiveFusion::init(d.ssl_dim, d.fusion_hidden, d.n_symbols, fusion_rng);

  timbre::MemoryConfig mem;
  mem.input_dim = timbre_width;
  mem.hidden = d.memory_hidden;
  mem.heads = d.memory_heads;
  mem.groups = d.memory_groups;
  mem.blocks = d.memory_blocks;
  mem.condition_dim = d.unet_hidden;
  auto memory_rng = num::make_rng(cfg.seeds.model, {3});
  m.memory_ = timbre::MemoryAugment::init(mem, memory_rng);

  timbre::ContextConfig ctx;
  ctx.content_dim = d.n_symbols;
  ctx.timbre_dim = timbre_width;
  ctx.model_dim = d.context_dim;
  ctx.heads = d.context_heads;
  ctx.blocks = d.context_blocks;
  ctx.ffn_dim = d.context_ffn;
  auto context_rng = num::make_rng(cfg.seeds.model, {4});
  m.context_ = timbre::ContextAwareFusion::init(ctx, context_rng);

  cfm::UNetConfig unet;
  unet.n_mels = cfg.mel.n_mels;
  unet.fused_dim = d.context_dim;
  unet.hidden = d.unet_hidden;
  unet.levels = d.unet_levels;
  unet.res_blocks = d.unet_res_blocks;
  unet.time_dim = d.unet_time_dim;
  unet.groups = d.unet_groups;
  auto field_rng = num::make_rng(cfg.seeds.model, {5});
  m.field_ = cfm::VectorFieldNet::init(unet, field_rng);
  return m;
}

void Model::visit_parameters(const num::ParamVisitor& fn) {
  fusion_.visit_parameters("fusion", fn);
  memory_.visit_parameters("memory", fn);
  context_.visit_parameters("context", fn);
  field_.visit_parameters("field", fn);
}

std::vector<num::Tensor> Model::parameters() {
  std::vector<num::Tensor> out;
  visit_parameters([&out](const std::string&, num::Tensor& p) { out.push_back(p); });
  return out;
}

void Model::visit_state(const num::ParamVisitor& fn) {
  for (std::size_t s = 0; s < codebooks_.size(); ++s) codebooks_[s].visit_state("rvq.stage" + std::to_string(s), fn);
  num::Tensor norm = num::Tensor::from({2}, {norm_.mean, norm_.scale});
  fn("mel_norm", norm);
  norm_.mean = norm.at(0);
  norm_.scale = norm.at(1);
}

dsp::MelSpectrogram Model::analyze(const dsp::Waveform& w) const {
  if (w.sample_rate != cfg_.mel.sample_rate) {
    throw InputError("audio sample rate " + std::to_string(w.sample_rate) + " does not match the model's " +
                     std::to_string(cfg_.mel.sample_rate));
  }
  const auto mel = dsp::mel_spectrogram(w, cfg_.mel);
  if (mel.num_frames() == 0) throw InputError("audio is shorter than one analysis window");
  return norm_.apply(mel);
}

timbre::TimbreSequence Model::reference_timbre(const dsp::Waveform& ref, std::uint64_t seed) const {
  if (ref.sample_rate != cfg_.mel.sample_rate) throw InputError("reference sample rate does not match the model");
  return timbre::build_reference_timbre(ref, seed, embedder_,
                                        {cfg_.train.ref_min_seconds, cfg_.train.ref_max_seconds}, norm_);
}

timbre::TimbreSequence Model::reference_timbre(const dsp::MelSpectrogram& raw_mel, std::size_t n_samples,
                                               const timbre::SpeakerEmbedding& embedding, std::uint64_t seed) const {
  return timbre::build_reference_timbre(raw_mel, n_samples, cfg_.mel.sample_rate, embedding, seed, cfg_.mel,
                                        {cfg_.train.ref_min_seconds, cfg_.train.ref_max_seconds}, norm_);
}

Conditioning Model::condition(const dsp::MelSpectrogram& source_mel,
                              const std::vector<content::SymbolSegment>& segments, std::size_t n_samples,
                              timbre::TimbreSequence reference) const {
  Conditioning c;
  c.ppg = ppg_.provide(segments, n_samples);
  c.quantized = content::rvq_quantize(ssl_.provide(source_mel).frames, codebooks_);
  c.content = content::adaptive_fuse(c.quantized, c.ppg, fusion_);
  c.reference = std::move(reference);
  c.condition.fused =
      timbre::context_aware_fuse(c.content.frames, c.reference, source_mel.num_frames(), context_).frames;
  c.condition.timbre = timbre::memory_augment(c.reference, memory_);
  return c;
}

void Model::export_records(std::vector<TensorRecord>& out) {
  const auto emit = [&out](const std::string& name, num::Tensor& t) {
    out.push_back({name, t.shape(), t.to_vector()});
  };
  visit_parameters(emit);
  visit_state(emit);
}

void Model::import_records(const Checkpoint& ckpt) {
  const auto load = [&ckpt](const std::string& name, num::Tensor& t) {
    const TensorRecord* r = ckpt.find(name);
    if (r == nullptr) throw CheckpointError("checkpoint is missing record '" + name + "'");
    if (r->shape != t.shape()) {
      throw CheckpointError("record '" + name + "' has shape " + num::shape_str(r->shape) + ", model expects " +
                            num::shape_str(t.shape()));
    }
    auto dst = t.mutable_data();
    std::copy(r->values.begin(), r->values.end(), dst.begin());
  };
  visit_parameters(load);
  visit_state(load);
}

Model Model::from_checkpoint(const Checkpoint& ckpt) {
  RunConfig cfg;
  try {
    cfg = RunConfig::from_text(ckpt.config_text);
  } catch (const InputError& e) {
    throw CheckpointError(std::string("checkpoint config is invalid: ") + e.what());
  }
  Model m = init(cfg);
  m.import_records(ckpt);
  std::set<std::string> known;
  const auto note = [&known](const std::string& name, num::Tensor&) { known.insert(name); };
  m.visit_parameters(note);
  m.visit_state(note);
  for (const auto& r : ckpt.records) {
    if (!known.count(r.name) && r.name.rfind("optim.", 0) != 0) {
      throw CheckpointError("checkpoint has unexpected record '" + r.name + "'");
    }
  }
  return m;
}

dsp::MelNorm fit_mel_norm(const std::vector<const dsp::Waveform*>& waves, const dsp::MelConfig& cfg) {
  double sum = 0.0, sq = 0.0;
  std::size_t n = 0;
  for (const auto* w : waves) {
    const auto m = dsp::mel_spectrogram(*w, cfg);
    for (const double v : m.frames.data()) {
      sum += v;
      sq += v * v;
    }
    n += m.frames.numel();
  }
  if (n == 0) throw InputError("cannot fit mel normalization on empty audio");
  const double mean = sum / static_cast<double>(n);
  const double var = std::max(sq / static_cast<double>(n) - mean * mean, 0.0);
  return {mean, var > 0.0 ? std::sqrt(var) : 1.0};
}

num::Tensor to_channels(const dsp::MelSpectrogram& m) { return num::transpose(m.frames); }

dsp::MelSpectrogram from_channels(const num::Tensor& x, const dsp::MelConfig& cfg) {
  return {num::transpose(x.detach()), cfg};
}

}  // namespace flowvc::pipeline
