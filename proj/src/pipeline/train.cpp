#include "flowvc/pipeline/train.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>

#include "flowvc/errors.hpp"
#include "flowvc/numerics/ops.hpp"

namespace flowvc::pipeline {

namespace {

constexpr std::uint64_t kEmaStream = 0xe3a;

std::size_t crop_alignment(const RunConfig& cfg) { return std::lcm(cfg.mel.hop_length, cfg.dims.ppg_hop); }

std::size_t crop_length(const RunConfig& cfg) {
  const std::size_t align = crop_alignment(cfg);
  const auto raw = static_cast<std::size_t>(std::floor(cfg.train.crop_seconds * cfg.mel.sample_rate));
  return std::max(align, raw / align * align);
}

std::vector<content::SymbolSegment> crop_segments(const std::vector<content::SymbolSegment>& segs, std::size_t begin,
                                                  std::size_t end) {
  std::vector<content::SymbolSegment> out;
  for (const auto& s : segs) {
    const std::size_t b = std::max(s.begin, begin), e = std::min(s.end, end);
    if (b < e) out.push_back({s.symbol, b - begin, e - begin});
  }
  return out;
}

// Columns of several [D x T_i] tensors side by side, as a constant.
num::Tensor concat_columns(const std::vector<num::Tensor>& parts) {
  const std::size_t rows = parts.front().rows();
  std::size_t cols = 0;
  for (const auto& p : parts) cols += p.cols();
  std::vector<double> out(rows * cols);
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const auto src = p.data();
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy(src.begin() + static_cast<std::ptrdiff_t>(r * p.cols()),
                src.begin() + static_cast<std::ptrdiff_t>((r + 1) * p.cols()),
                out.begin() + static_cast<std::ptrdiff_t>(r * cols + offset));
    }
    offset += p.cols();
  }
  return num::Tensor::from({rows, cols}, std::move(out));
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

LossTerms combine_losses(const num::Tensor& cfm, const num::Tensor& vq, double lambda) {
  return {cfm + num::scale(vq, lambda), cfm, vq};
}

BatchLoss total_loss(const std::vector<TrainItem>& batch, const Model& model, num::Rng& rng) {
  if (batch.empty()) throw InputError("total_loss: empty batch");
  const RunConfig& cfg = model.config();
  const cfm::FlowPathParams path{cfg.cfm.sigma_min};
  BatchLoss out;
  num::Tensor cfm_sum, vq_sum;
  for (const auto& item : batch) {
    Conditioning c = model.condition(item.mel, item.segments, item.n_samples, item.reference);
    const auto draw = cfm::cfm_loss(to_channels(item.mel), c.condition, model.field(), path, rng, cfg.cfm.drop_prob);
    const auto vq = content::rvq_commit_loss(c.quantized.residuals.front(), c.quantized);
    cfm_sum = cfm_sum.defined() ? cfm_sum + draw.loss : draw.loss;
    vq_sum = vq_sum.defined() ? vq_sum + vq : vq;
    out.conditioning.push_back(std::move(c));
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  out.terms = combine_losses(num::scale(cfm_sum, inv), num::scale(vq_sum, inv), cfg.rvq.weight);
  return out;
}

std::string format_log_line(const StepStats& s) {
  return std::to_string(s.step) + '\t' + fmt(s.total) + '\t' + fmt(s.cfm) + '\t' + fmt(s.vq);
}

void check_trainable(const Corpus& corpus, const RunConfig& cfg) {
  if (corpus.speakers.empty()) throw InputError("corpus has no speakers");
  const std::size_t crop = crop_length(cfg);
  const auto ref_min = static_cast<std::size_t>(std::ceil(cfg.train.ref_min_seconds * cfg.mel.sample_rate));
  for (std::size_t s = 0; s < corpus.speakers.size(); ++s) {
    const auto utts = corpus.utterances_of(s);
    if (utts.size() < 2) {
      throw InputError("corpus too small: speaker " + std::to_string(s) + " has " + std::to_string(utts.size()) +
                       " utterance(s), training needs at least 2 per speaker");
    }
    for (const auto u : utts) {
      const auto n = corpus.utterances[u].audio.samples.size();
      if (n < crop || n < ref_min) {
        throw InputError("utterance " + corpus.utterances[u].id + " is too short for a " + fmt(cfg.train.crop_seconds) +
                         " s crop and a " + fmt(cfg.train.ref_min_seconds) + " s reference");
      }
    }
  }
}

num::AdamConfig TrainingSession::adam_config(const RunConfig& cfg) {
  return {cfg.optim.lr, cfg.optim.beta1, cfg.optim.beta2, cfg.optim.eps, cfg.optim.weight_decay};
}

TrainingSession::TrainingSession(const RunConfig& cfg, const Corpus& corpus)
    : model_(Model::init(cfg)), corpus_(&corpus), opt_({}, adam_config(cfg)) {
  check_trainable(corpus, cfg);
  std::vector<const dsp::Waveform*> waves;
  for (const auto& u : corpus.utterances) waves.push_back(&u.audio);
  model_.mel_norm() = fit_mel_norm(waves, cfg.mel);
  opt_ = num::AdamW(model_.parameters(), adam_config(cfg));
  prepare();
}

TrainingSession::TrainingSession(const Checkpoint& ckpt, const Corpus& corpus)
    : model_(Model::from_checkpoint(ckpt)), corpus_(&corpus), opt_({}, adam_config(model_.config())) {
  check_trainable(corpus, model_.config());
  opt_ = num::AdamW(model_.parameters(), adam_config(model_.config()));
  const TensorRecord* step = ckpt.find("optim.step");
  if (step == nullptr || step->values.size() != 1) throw CheckpointError("checkpoint has no optimizer step record");
  std::size_t i = 0;
  model_.visit_parameters([&](const std::string& name, num::Tensor& p) {
    auto& state = opt_.states()[i++];
    for (const char* which : {"m", "v"}) {
      const TensorRecord* r = ckpt.find("optim." + name + "." + which);
      if (r == nullptr || r->values.size() != p.numel()) {
        throw CheckpointError("checkpoint optimizer state for '" + name + "' is missing or misshaped");
      }
      (which[0] == 'm' ? state.m : state.v) = r->values;
    }
    state.step = static_cast<std::uint64_t>(step->values[0]);
  });
  step_ = ckpt.step;
  prepare();
}

void TrainingSession::prepare() {
  const RunConfig& cfg = model_.config();
  align_ = crop_alignment(cfg);
  crop_samples_ = crop_length(cfg);
  crop_frames_ = cfg.mel.frame_count(crop_samples_);
  if (crop_frames_ == 0) throw InputError("training crop is shorter than one analysis window");
  analyses_.clear();
  for (const auto& u : corpus_->utterances) {
    auto raw = dsp::mel_spectrogram(u.audio, cfg.mel);
    auto normalized = model_.mel_norm().apply(raw);
    auto embedding = model_.embedder().embed(raw);
    analyses_.push_back({std::move(raw), std::move(normalized), std::move(embedding)});
  }
  by_speaker_.assign(corpus_->speakers.size(), {});
  for (std::size_t i = 0; i < corpus_->utterances.size(); ++i) by_speaker_[corpus_->utterances[i].speaker].push_back(i);
}

namespace {

std::vector<TrainItem> draw_batch(num::Rng& rng, const Model& model, const Corpus& corpus,
                                  const std::vector<UtteranceAnalysis>& analyses,
                                  const std::vector<std::vector<std::size_t>>& by_speaker, std::size_t crop_samples,
                                  std::size_t crop_frames, std::size_t align) {
  const RunConfig& cfg = model.config();
  std::vector<TrainItem> batch;
  for (std::size_t b = 0; b < cfg.optim.batch_size; ++b) {
    const std::size_t u = num::uniform_index(rng, corpus.utterances.size());
    const auto& utt = corpus.utterances[u];
    const std::size_t n = utt.audio.samples.size();
    const std::size_t start = align * num::uniform_index(rng, (n - crop_samples) / align + 1);
    const std::size_t first_frame = start / cfg.mel.hop_length;

    const auto& peers = by_speaker[utt.speaker];
    std::size_t r = peers[num::uniform_index(rng, peers.size() - 1)];
    if (r == u) r = peers.back();
    const std::uint64_t ref_seed = rng();

    TrainItem item;
    item.mel = dsp::slice_frames(analyses[u].normalized, first_frame, first_frame + crop_frames);
    item.segments = crop_segments(utt.segments, start, start + crop_samples);
    item.n_samples = crop_samples;
    item.reference = model.reference_timbre(analyses[r].raw, corpus.utterances[r].audio.samples.size(),
                                            analyses[r].embedding, ref_seed);
    batch.push_back(std::move(item));
  }
  return batch;
}

}  // namespace

std::vector<TrainItem> TrainingSession::batch_for(std::uint64_t step) const {
  auto rng = num::make_rng(model_.config().seeds.data, {step});
  return draw_batch(rng, model_, *corpus_, analyses_, by_speaker_, crop_samples_, crop_frames_, align_);
}

StepStats TrainingSession::step() {
  const RunConfig& cfg = model_.config();
  const std::uint64_t k = step_;
  auto rng = num::make_rng(cfg.seeds.data, {k});
  const auto batch = draw_batch(rng, model_, *corpus_, analyses_, by_speaker_, crop_samples_, crop_frames_, align_);

  opt_.zero_grad();
  BatchLoss loss;
  try {
    loss = total_loss(batch, model_, rng);
  } catch (const num::TensorError& e) {
    throw TrainingError("non-finite value in the forward pass at step " + std::to_string(k + 1) + ": " + e.what());
  }
  StepStats stats{k + 1, loss.terms.total.item(), loss.terms.cfm.item(), loss.terms.vq.item(), 0.0};
  if (!std::isfinite(stats.total)) {
    throw TrainingError("non-finite loss at step " + std::to_string(stats.step) + ": L_cfm=" + fmt(stats.cfm) +
                        " L_vq=" + fmt(stats.vq));
  }
  num::backward(loss.terms.total);

  double sq = 0.0;
  model_.fusion().visit_parameters("", [&sq](const std::string&, num::Tensor& p) {
    for (const double g : p.grad()) sq += g * g;
  });
  stats.fusion_grad_norm = std::sqrt(sq);
  opt_.step();

  auto ema_rng = num::make_rng(cfg.seeds.data, {k, kEmaStream});
  const content::EmaConfig ema{cfg.rvq.decay, cfg.rvq.epsilon, cfg.rvq.dead_threshold};
  for (std::size_t s = 0; s < model_.codebooks().size(); ++s) {
    std::vector<num::Tensor> inputs;
    std::vector<std::size_t> codes;
    for (const auto& c : loss.conditioning) {
      inputs.push_back(c.quantized.residuals[s]);
      codes.insert(codes.end(), c.quantized.codes[s].begin(), c.quantized.codes[s].end());
    }
    content::codebook_update_ema(model_.codebooks()[s], concat_columns(inputs), codes, ema, ema_rng);
  }
  step_ = k + 1;
  return stats;
}

std::vector<StepStats> TrainingSession::run(std::uint64_t target, std::ostream* log,
                                            const std::function<void(const Checkpoint&)>& on_checkpoint) {
  std::vector<StepStats> out;
  const std::size_t every = model_.config().train.checkpoint_every;
  while (step_ < target) {
    out.push_back(step());
    if (log != nullptr) *log << format_log_line(out.back()) << '\n' << std::flush;
    if (on_checkpoint && every > 0 && step_ % every == 0) on_checkpoint(checkpoint());
  }
  return out;
}

Checkpoint TrainingSession::checkpoint() {
  Checkpoint c;
  c.config_text = model_.config().to_text();
  c.step = step_;
  model_.export_records(c.records);
  std::size_t i = 0;
  std::uint64_t adam_steps = 0;
  model_.visit_parameters([&](const std::string& name, num::Tensor& p) {
    const auto& state = opt_.states()[i++];
    const auto values = [&](const std::vector<double>& v) { return v.empty() ? std::vector<double>(p.numel()) : v; };
    c.records.push_back({"optim." + name + ".m", p.shape(), values(state.m)});
    c.records.push_back({"optim." + name + ".v", p.shape(), values(state.v)});
    adam_steps = state.step;
  });
  c.records.push_back({"optim.step", {1}, {static_cast<double>(adam_steps)}});
  return c;
}

}  // namespace flowvc::pipeline
