#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "flowvc/dsp/audio.hpp"
#include "flowvc/numerics/tensor.hpp"

namespace flowvc::dsp {

struct MelConfig {
  double sample_rate = 16000.0;
  std::size_t n_fft = 1024;
  std::size_t win_length = 1024;
  std::size_t hop_length = 256;
  std::size_t n_mels = 80;
  double f_min = 0.0;
  double f_max = 8000.0;
  double log_floor = 1e-5;

  std::size_t n_bins() const { return n_fft / 2 + 1; }
  /// Frames produced for a signal of `n` samples (0 when shorter than a window).
  std::size_t frame_count(std::size_t n) const;
  /// Throws InputError when the invariants hop <= win <= n_fft and
  /// f_min < f_max <= sample_rate / 2 do not hold.
  void validate() const;

  bool operator==(const MelConfig&) const = default;
};

/// Log-mel energies, one row per frame: frames is [T x n_mels].
struct MelSpectrogram {
  num::Tensor frames;
  MelConfig config;

  std::size_t num_frames() const { return frames.rows(); }
  std::size_t num_mels() const { return frames.cols(); }
};

/// Scalar standardization of log-mel values: (x - mean) / scale.
struct MelNorm {
  double mean = 0.0;
  double scale = 1.0;

  MelSpectrogram apply(const MelSpectrogram& m) const;
  MelSpectrogram invert(const MelSpectrogram& m) const;
};

/// Slaney mel scale: linear below 1 kHz (3 bands per 200 Hz), logarithmic above.
double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// Triangular filterbank [n_mels x n_bins] with band edges evenly spaced on
/// the Slaney mel scale between f_min and f_max, each row scaled by
/// 2 / (f_right - f_left) so every triangle has unit area in Hz.
num::Tensor mel_filterbank(const MelConfig& cfg);
/// Center frequencies (Hz) of the mel bands.
std::vector<double> mel_band_centers(const MelConfig& cfg);

/// Periodic Hann window of length win_length.
std::vector<double> hann_window(std::size_t length);

/// Complex STFT, [T][n_bins], frames at t*hop with the window applied and
/// zero-padded to n_fft; no centering or reflect padding.
std::vector<std::vector<std::complex<double>>> stft(const std::vector<double>& samples, const MelConfig& cfg);
/// Least-squares inverse of `stft`: overlap-add of windowed inverse frames
/// divided by the summed squared window. Output length (T-1)*hop + win.
std::vector<double> istft(const std::vector<std::vector<std::complex<double>>>& spec, const MelConfig& cfg);

/// Magnitude STFT -> mel filterbank -> log(max(., log_floor)).
/// T = 1 + floor((len - win_length) / hop_length).
MelSpectrogram mel_spectrogram(const Waveform& w, const MelConfig& cfg);

/// Uniform seeded permutation of frames (Fisher-Yates over make_rng(seed)
/// with rejection-sampled indices). Returns the permutation applied:
/// out[i] = in[perm[i]].
std::vector<std::size_t> shuffle_permutation(std::size_t n, std::uint64_t seed);
MelSpectrogram shuffle_frames(const MelSpectrogram& m, std::uint64_t seed);

/// Rows [begin, end) of a mel spectrogram.
MelSpectrogram slice_frames(const MelSpectrogram& m, std::size_t begin, std::size_t end);

}  // namespace flowvc::dsp
