#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "flowvc/dsp/mel.hpp"
#include "flowvc/numerics/layers.hpp"

namespace flowvc::content {

/// Frame-rate feature track. frames is channel-major: [D x T_f].
struct FeatureSequence {
  num::Tensor frames;
  double frame_rate = 0.0;

  std::size_t length() const { return frames.cols(); }
  std::size_t dim() const { return frames.rows(); }
};

/// A symbol spanning samples [begin, end).
struct SymbolSegment {
  std::size_t symbol = 0;
  std::size_t begin = 0;
  std::size_t end = 0;
};

/// Symbol under each frame center, for frames starting at t*hop with the given
/// window length. Centers past the last segment take the last symbol.
std::vector<std::size_t> frame_symbols(const std::vector<SymbolSegment>& segments, std::size_t n_frames,
                                       std::size_t hop, std::size_t window);

/// Smoothed one-hot posteriors: 1-eps on the labelled symbol, eps/(S-1)
/// elsewhere. Output [S x T].
num::Tensor posteriorgram(const std::vector<std::size_t>& frame_labels, std::size_t n_symbols, double eps);

struct PpgConfig {
  std::size_t n_symbols = 12;
  double smoothing = 0.0;
  std::size_t hop_samples = 320;
  double sample_rate = 16000.0;
};

/// Frozen PPG stand-in built from a ground-truth alignment.
/// T_p = max(1, n_samples / hop_samples).
class PpgProvider {
 public:
  explicit PpgProvider(PpgConfig cfg);
  FeatureSequence provide(const std::vector<SymbolSegment>& segments, std::size_t n_samples) const;
  std::size_t frames_for(std::size_t n_samples) const;
  const PpgConfig& config() const { return cfg_; }

 private:
  PpgConfig cfg_;
};

struct SslConfig {
  std::size_t n_mels = 80;
  std::size_t hidden = 64;
  std::size_t dim = 64;
  std::uint64_t seed = 1;
};

/// Frozen SSL stand-in: mel with per-band mean removed -> stride-2 conv (K=3)
/// -> tanh -> conv (K=3). Output [dim x ceil(T/2)]. Weights never require grad.
class SslProvider {
 public:
  explicit SslProvider(SslConfig cfg);
  FeatureSequence provide(const dsp::MelSpectrogram& m) const;
  const SslConfig& config() const { return cfg_; }
  /// Read-only view of the frozen weights (for immutability checks).
  std::vector<num::Tensor> weights() const;

 private:
  SslConfig cfg_;
  num::Conv1d first_;
  num::Conv1d second_;
};

}  // namespace flowvc::content
