#include "flowvc/timbre/speaker.hpp"

#include <algorithm>
#include <cmath>

#include "flowvc/errors.hpp"
#include "flowvc/numerics/ops.hpp"
#include "flowvc/numerics/random.hpp"

namespace flowvc::timbre {

double cosine_similarity(const SpeakerEmbedding& a, const SpeakerEmbedding& b) {
  if (a.dim() != b.dim()) throw InputError("cosine_similarity: dimension mismatch");
  const auto x = a.vector.data(), y = b.vector.data();
  double xy = 0.0, xx = 0.0, yy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    xy += x[i] * y[i];
    xx += x[i] * x[i];
    yy += y[i] * y[i];
  }
  if (xx == 0.0 || yy == 0.0) return 0.0;
  return std::clamp(xy / std::sqrt(xx * yy), -1.0, 1.0);
}

SpeakerEmbedder::SpeakerEmbedder(std::uint64_t seed, std::size_t dim, dsp::MelConfig mel) : dim_(dim), mel_(mel) {
  mel_.validate();
  auto rng = num::make_rng(seed, {0x5be});
  projection_ = num::normal_tensor({dim_, 2 * mel_.n_mels}, 1.0 / std::sqrt(2.0 * static_cast<double>(mel_.n_mels)), rng);
}

SpeakerEmbedding SpeakerEmbedder::embed(const dsp::Waveform& w) const {
  const std::size_t needed = mel_.win_length;
  if (w.samples.size() < needed) {
    throw InputError("speaker embedding needs at least " + std::to_string(needed) + " samples, got " +
                     std::to_string(w.samples.size()));
  }
  return embed(dsp::mel_spectrogram(w, mel_));
}

SpeakerEmbedding SpeakerEmbedder::embed(const dsp::MelSpectrogram& m) const {
  const std::size_t bands = mel_.n_mels, frames = m.num_frames();
  if (m.num_mels() != bands || frames == 0) throw InputError("speaker embedding: mel shape mismatch");
  const auto src = m.frames.data();
  std::vector<double> stats(2 * bands, 0.0);
  for (std::size_t b = 0; b < bands; ++b) {
    double mu = 0.0;
    for (std::size_t t = 0; t < frames; ++t) mu += src[t * bands + b];
    mu /= static_cast<double>(frames);
    double var = 0.0;
    for (std::size_t t = 0; t < frames; ++t) var += (src[t * bands + b] - mu) * (src[t * bands + b] - mu);
    stats[b] = mu;
    stats[bands + b] = std::sqrt(var / static_cast<double>(frames));
  }
  double level = 0.0;
  for (std::size_t b = 0; b < bands; ++b) level += stats[b] / static_cast<double>(bands);
  for (std::size_t b = 0; b < bands; ++b) stats[b] -= level;

  const auto p = projection_.data();
  std::vector<double> z(dim_, 0.0);
  double norm = 0.0;
  for (std::size_t i = 0; i < dim_; ++i) {
    for (std::size_t j = 0; j < stats.size(); ++j) z[i] += p[i * stats.size() + j] * stats[j];
    norm += z[i] * z[i];
  }
  norm = std::sqrt(norm);
  if (norm < 1e-12) {
    std::fill(z.begin(), z.end(), 0.0);
    z[0] = 1.0;
  } else {
    for (auto& v : z) v /= norm;
  }
  return {num::Tensor::from({dim_}, std::move(z))};
}

TimbreSequence make_timbre_sequence(const dsp::MelSpectrogram& frames, const SpeakerEmbedding& e) {
  const std::size_t t = frames.num_frames();
  const auto mel = num::transpose(frames.frames.detach());
  return {num::concat_rows({mel, num::broadcast_cols(e.vector.detach(), t)}), frames.num_mels()};
}

ReferenceSegment pick_reference_segment(std::size_t n_samples, double sample_rate, std::size_t hop, std::uint64_t seed,
                                        const ReferenceConfig& cfg) {
  if (!(cfg.min_seconds > 0.0 && cfg.min_seconds <= cfg.max_seconds)) {
    throw InputError("reference segment bounds must satisfy 0 < min <= max");
  }
  const auto min_len = static_cast<std::size_t>(std::ceil(cfg.min_seconds * sample_rate));
  if (n_samples < min_len) {
    throw InputError("reference of " + std::to_string(static_cast<double>(n_samples) / sample_rate) +
                     " s is shorter than the minimum segment (" + std::to_string(cfg.min_seconds) + " s)");
  }
  auto rng = num::make_rng(seed, {0x7e5});
  const auto max_len = std::min(n_samples, static_cast<std::size_t>(std::floor(cfg.max_seconds * sample_rate)));
  ReferenceSegment seg;
  seg.length = min_len + static_cast<std::size_t>(num::uniform_index(rng, max_len - min_len + 1));
  seg.start = hop * static_cast<std::size_t>(num::uniform_index(rng, (n_samples - seg.length) / hop + 1));
  seg.shuffle_seed = rng();
  return seg;
}

TimbreSequence build_reference_timbre(const dsp::Waveform& ref, std::uint64_t seed, const SpeakerEmbedder& embedder,
                                      const ReferenceConfig& cfg, const dsp::MelNorm& norm) {
  const auto& mel_cfg = embedder.mel_config();
  const auto seg = pick_reference_segment(ref.samples.size(), ref.sample_rate, mel_cfg.hop_length, seed, cfg);
  dsp::Waveform segment{{ref.samples.begin() + static_cast<std::ptrdiff_t>(seg.start),
                         ref.samples.begin() + static_cast<std::ptrdiff_t>(seg.start + seg.length)},
                        ref.sample_rate};
  const auto mel = norm.apply(dsp::mel_spectrogram(segment, mel_cfg));
  return make_timbre_sequence(dsp::shuffle_frames(mel, seg.shuffle_seed), embedder.embed(ref));
}

TimbreSequence build_reference_timbre(const dsp::MelSpectrogram& ref_mel, std::size_t n_samples, double sample_rate,
                                      const SpeakerEmbedding& embedding, std::uint64_t seed,
                                      const dsp::MelConfig& mel_cfg, const ReferenceConfig& cfg,
                                      const dsp::MelNorm& norm) {
  const std::size_t hop = mel_cfg.hop_length, win = mel_cfg.win_length;
  if (n_samples < win || ref_mel.num_frames() != 1 + (n_samples - win) / hop) {
    throw InputError("reference analysis does not match the stated reference length");
  }
  const auto seg = pick_reference_segment(n_samples, sample_rate, hop, seed, cfg);
  if (seg.length < win) throw InputError("reference segment shorter than one analysis window");
  const std::size_t first = seg.start / hop;
  const auto mel = norm.apply(dsp::slice_frames(ref_mel, first, first + 1 + (seg.length - win) / hop));
  return make_timbre_sequence(dsp::shuffle_frames(mel, seg.shuffle_seed), embedding);
}

}  // namespace flowvc::timbre
