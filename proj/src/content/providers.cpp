#include "flowvc/content/providers.hpp"

#include <algorithm>
#include <cmath>

#include "flowvc/errors.hpp"

namespace flowvc::content {

std::vector<std::size_t> frame_symbols(const std::vector<SymbolSegment>& segments, std::size_t n_frames,
                                       std::size_t hop, std::size_t window) {
  if (segments.empty()) throw InputError("empty label sequence");
  std::vector<std::size_t> out(n_frames);
  std::size_t s = 0;
  for (std::size_t t = 0; t < n_frames; ++t) {
    const std::size_t center = t * hop + window / 2;
    while (s + 1 < segments.size() && center >= segments[s].end) ++s;
    out[t] = segments[s].symbol;
  }
  return out;
}

num::Tensor posteriorgram(const std::vector<std::size_t>& frame_labels, std::size_t n_symbols, double eps) {
  if (frame_labels.empty()) throw InputError("empty label sequence");
  if (n_symbols < 2) throw InputError("posteriorgram needs at least two symbols");
  if (!(eps >= 0.0 && eps < 0.5)) throw InputError("PPG smoothing must lie in [0, 0.5)");
  const std::size_t frames = frame_labels.size();
  const double off = eps / static_cast<double>(n_symbols - 1);
  std::vector<double> v(n_symbols * frames, off);
  for (std::size_t t = 0; t < frames; ++t) {
    if (frame_labels[t] >= n_symbols) throw InputError("symbol index out of range");
    v[frame_labels[t] * frames + t] = 1.0 - eps;
  }
  return num::Tensor::from({n_symbols, frames}, std::move(v));
}

PpgProvider::PpgProvider(PpgConfig cfg) : cfg_(cfg) {
  if (cfg_.hop_samples == 0) throw InputError("PPG hop must be positive");
}

std::size_t PpgProvider::frames_for(std::size_t n_samples) const {
  return std::max<std::size_t>(1, n_samples / cfg_.hop_samples);
}

FeatureSequence PpgProvider::provide(const std::vector<SymbolSegment>& segments, std::size_t n_samples) const {
  const auto labels = frame_symbols(segments, frames_for(n_samples), cfg_.hop_samples, cfg_.hop_samples);
  return {posteriorgram(labels, cfg_.n_symbols, cfg_.smoothing),
          cfg_.sample_rate / static_cast<double>(cfg_.hop_samples)};
}

SslProvider::SslProvider(SslConfig cfg) : cfg_(cfg) {
  auto rng = num::make_rng(cfg_.seed, {0x551});
  first_ = num::Conv1d::init(cfg_.n_mels, cfg_.hidden, 3, rng, 2, 1, 1.5);
  second_ = num::Conv1d::init(cfg_.hidden, cfg_.dim, 3, rng, 1, 1, 1.0);
  for (auto* t : {&first_.weight, &first_.bias, &second_.weight, &second_.bias}) *t = t->detach();
}

FeatureSequence SslProvider::provide(const dsp::MelSpectrogram& m) const {
  if (m.num_mels() != cfg_.n_mels) throw InputError("SSL provider: mel band count mismatch");
  const std::size_t frames = m.num_frames(), mels = m.num_mels();
  // Channel-major copy with the per-band utterance mean removed.
  std::vector<double> x(mels * frames);
  const auto src = m.frames.data();
  for (std::size_t b = 0; b < mels; ++b) {
    double mu = 0.0;
    for (std::size_t t = 0; t < frames; ++t) mu += src[t * mels + b];
    mu /= static_cast<double>(frames);
    for (std::size_t t = 0; t < frames; ++t) x[b * frames + t] = src[t * mels + b] - mu;
  }
  num::NoGradGuard guard;
  const auto input = num::Tensor::from({mels, frames}, std::move(x));
  const auto h = num::tanh(first_(input));
  return {second_(h).detach(), m.config.sample_rate / static_cast<double>(2 * m.config.hop_length)};
}

std::vector<num::Tensor> SslProvider::weights() const {
  return {first_.weight, first_.bias, second_.weight, second_.bias};
}

}  // namespace flowvc::content
