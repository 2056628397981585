#include "flowvc/dsp/mel.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fft.hpp"
#include "flowvc/errors.hpp"
#include "flowvc/numerics/ops.hpp"
#include "flowvc/numerics/random.hpp"

namespace flowvc::dsp {

namespace {
constexpr double kMinLogHz = 1000.0;
constexpr double kLinearStep = 200.0 / 3.0;
constexpr double kMinLogMel = kMinLogHz / kLinearStep;  // 15
const double kLogStep = std::log(6.4) / 27.0;
}  // namespace

std::size_t MelConfig::frame_count(std::size_t n) const {
  if (n < win_length) return 0;
  return 1 + (n - win_length) / hop_length;
}

void MelConfig::validate() const {
  if (!(sample_rate > 0.0)) throw InputError("mel config: sample_rate must be positive");
  if (hop_length == 0 || hop_length > win_length || win_length > n_fft) {
    throw InputError("mel config: require 0 < hop_length <= win_length <= n_fft");
  }
  if (n_mels == 0) throw InputError("mel config: n_mels must be positive");
  if (!(f_min >= 0.0 && f_min < f_max && f_max <= sample_rate / 2.0)) {
    throw InputError("mel config: require 0 <= f_min < f_max <= sample_rate / 2");
  }
  if (!(log_floor > 0.0)) throw InputError("mel config: log_floor must be positive");
}

double hz_to_mel(double hz) {
  if (hz < kMinLogHz) return hz / kLinearStep;
  return kMinLogMel + std::log(hz / kMinLogHz) / kLogStep;
}

double mel_to_hz(double mel) {
  if (mel < kMinLogMel) return mel * kLinearStep;
  return kMinLogHz * std::exp(kLogStep * (mel - kMinLogMel));
}

namespace {
std::vector<double> band_edges(const MelConfig& cfg) {
  const double lo = hz_to_mel(cfg.f_min), hi = hz_to_mel(cfg.f_max);
  std::vector<double> edges(cfg.n_mels + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    edges[i] = mel_to_hz(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(cfg.n_mels + 1));
  }
  return edges;
}
}  // namespace

std::vector<double> mel_band_centers(const MelConfig& cfg) {
  const auto edges = band_edges(cfg);
  return {edges.begin() + 1, edges.end() - 1};
}

num::Tensor mel_filterbank(const MelConfig& cfg) {
  cfg.validate();
  const auto edges = band_edges(cfg);
  const std::size_t bins = cfg.n_bins();
  std::vector<double> fb(cfg.n_mels * bins, 0.0);
  for (std::size_t m = 0; m < cfg.n_mels; ++m) {
    const double left = edges[m], center = edges[m + 1], right = edges[m + 2];
    const double norm = 2.0 / (right - left);
    for (std::size_t k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * cfg.sample_rate / static_cast<double>(cfg.n_fft);
      const double rise = (f - left) / (center - left);
      const double fall = (right - f) / (right - center);
      fb[m * bins + k] = std::max(0.0, std::min(rise, fall)) * norm;
    }
  }
  return num::Tensor::from({cfg.n_mels, bins}, std::move(fb));
}

std::vector<double> hann_window(std::size_t length) {
  std::vector<double> w(length);
  for (std::size_t i = 0; i < length; ++i) {
    w[i] = 0.5 - 0.5 * std::cos(2.0 * M_PI * static_cast<double>(i) / static_cast<double>(length));
  }
  return w;
}

std::vector<std::vector<std::complex<double>>> stft(const std::vector<double>& samples, const MelConfig& cfg) {
  const std::size_t frames = cfg.frame_count(samples.size());
  if (frames == 0) {
    throw InputError("signal of " + std::to_string(samples.size()) + " samples is shorter than one analysis window (" +
                     std::to_string(cfg.win_length) + ")");
  }
  const auto window = hann_window(cfg.win_length);
  detail::RealFft fft(cfg.n_fft);
  std::vector<double> buf(cfg.n_fft, 0.0);
  std::vector<std::vector<std::complex<double>>> out(frames, std::vector<std::complex<double>>(cfg.n_bins()));
  for (std::size_t t = 0; t < frames; ++t) {
    const double* src = samples.data() + t * cfg.hop_length;
    for (std::size_t i = 0; i < cfg.win_length; ++i) buf[i] = src[i] * window[i];
    fft.forward(buf.data(), out[t].data());
  }
  return out;
}

std::vector<double> istft(const std::vector<std::vector<std::complex<double>>>& spec, const MelConfig& cfg) {
  if (spec.empty()) return {};
  const auto window = hann_window(cfg.win_length);
  const std::size_t length = (spec.size() - 1) * cfg.hop_length + cfg.win_length;
  std::vector<double> out(length, 0.0), weight(length, 0.0), frame(cfg.n_fft);
  detail::RealFft fft(cfg.n_fft);
  for (std::size_t t = 0; t < spec.size(); ++t) {
    fft.inverse(spec[t].data(), frame.data());
    const std::size_t base = t * cfg.hop_length;
    for (std::size_t i = 0; i < cfg.win_length; ++i) {
      out[base + i] += window[i] * frame[i];
      weight[base + i] += window[i] * window[i];
    }
  }
  // Floor the overlap weight so the tapered ends do not amplify noise.
  const double floor = 1e-3 * *std::max_element(weight.begin(), weight.end());
  for (std::size_t i = 0; i < length; ++i) out[i] /= std::max(weight[i], floor);
  return out;
}

MelSpectrogram mel_spectrogram(const Waveform& w, const MelConfig& cfg) {
  cfg.validate();
  const auto spec = stft(w.samples, cfg);
  const auto fb = mel_filterbank(cfg);
  const std::size_t bins = cfg.n_bins(), frames = spec.size();
  const auto fbv = fb.data();
  std::vector<double> out(frames * cfg.n_mels);
  std::vector<double> mag(bins);
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t k = 0; k < bins; ++k) mag[k] = std::abs(spec[t][k]);
    for (std::size_t m = 0; m < cfg.n_mels; ++m) {
      double e = 0.0;
      const double* row = fbv.data() + m * bins;
      for (std::size_t k = 0; k < bins; ++k) e += row[k] * mag[k];
      out[t * cfg.n_mels + m] = std::log(std::max(e, cfg.log_floor));
    }
  }
  return MelSpectrogram{num::Tensor::from({frames, cfg.n_mels}, std::move(out)), cfg};
}

std::vector<std::size_t> shuffle_permutation(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  auto rng = num::make_rng(seed);
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(num::uniform_index(rng, i));
    std::swap(perm[i - 1], perm[j]);
  }
  return perm;
}

MelSpectrogram shuffle_frames(const MelSpectrogram& m, std::uint64_t seed) {
  const std::size_t frames = m.num_frames(), mels = m.num_mels();
  const auto perm = shuffle_permutation(frames, seed);
  const auto src = m.frames.data();
  std::vector<double> out(frames * mels);
  for (std::size_t i = 0; i < frames; ++i) {
    std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(perm[i] * mels), mels,
                out.begin() + static_cast<std::ptrdiff_t>(i * mels));
  }
  return MelSpectrogram{num::Tensor::from({frames, mels}, std::move(out)), m.config};
}

MelSpectrogram MelNorm::apply(const MelSpectrogram& m) const {
  if (!(scale > 0.0)) throw InputError("mel normalization scale must be positive");
  return MelSpectrogram{num::scale(num::add_scalar(m.frames.detach(), -mean), 1.0 / scale), m.config};
}

MelSpectrogram MelNorm::invert(const MelSpectrogram& m) const {
  return MelSpectrogram{num::add_scalar(num::scale(m.frames.detach(), scale), mean), m.config};
}

MelSpectrogram slice_frames(const MelSpectrogram& m, std::size_t begin, std::size_t end) {
  if (begin >= end || end > m.num_frames()) throw InputError("slice_frames: invalid frame range");
  const std::size_t mels = m.num_mels();
  const auto src = m.frames.data();
  std::vector<double> out(src.begin() + static_cast<std::ptrdiff_t>(begin * mels),
                          src.begin() + static_cast<std::ptrdiff_t>(end * mels));
  return MelSpectrogram{num::Tensor::from({end - begin, mels}, std::move(out)), m.config};
}

}  // namespace flowvc::dsp
