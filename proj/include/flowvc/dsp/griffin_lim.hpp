#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "flowvc/dsp/audio.hpp"
#include "flowvc/dsp/mel.hpp"

namespace flowvc::dsp {

/// Lawson-Hanson active-set solver for min ||A x - b||_2 subject to x >= 0.
/// A is row-major [rows x cols].
std::vector<double> nnls(const std::vector<double>& a, std::size_t rows, std::size_t cols,
                         const std::vector<double>& b, std::size_t max_iter = 0);

/// Linear STFT magnitudes [T][n_bins] recovered from log-mel frames by
/// per-frame NNLS against the mel filterbank.
std::vector<std::vector<double>> mel_to_linear(const MelSpectrogram& m);

struct GriffinLimResult {
  Waveform waveform;
  /// ||(|STFT(x_k)| - S)||_F / ||S||_F after each iteration k, measured over
  /// the full (two-sided) spectrum.
  std::vector<double> spectral_convergence;
};

/// Phase retrieval by alternating projections between magnitude-consistent
/// and STFT-consistent spectrograms, starting from seeded random phase.
/// The output level follows the mel, so samples may exceed [-1, 1]; apply
/// limit_peak before writing PCM.
GriffinLimResult griffin_lim(const MelSpectrogram& m, std::size_t n_iters, std::uint64_t seed = 0);

}  // namespace flowvc::dsp
