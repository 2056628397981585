#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "flowvc/dsp/audio.hpp"
#include "flowvc/dsp/mel.hpp"
#include "flowvc/numerics/tensor.hpp"

namespace flowvc::timbre {

inline constexpr std::size_t kSpeakerDim = 192;

/// Unit-norm speaker vector [D_spk].
struct SpeakerEmbedding {
  num::Tensor vector;

  std::size_t dim() const { return vector.numel(); }
};

double cosine_similarity(const SpeakerEmbedding& a, const SpeakerEmbedding& b);

/// Frozen speaker-verification stand-in. Per-band mean and standard deviation
/// of the log-mel (means shifted to zero average over bands) are mapped by a
/// fixed Gaussian matrix to `dim` values and L2-normalized.
class SpeakerEmbedder {
 public:
  explicit SpeakerEmbedder(std::uint64_t seed, std::size_t dim = kSpeakerDim, dsp::MelConfig mel = {});
  SpeakerEmbedding embed(const dsp::Waveform& w) const;
  SpeakerEmbedding embed(const dsp::MelSpectrogram& m) const;
  std::size_t dim() const { return dim_; }
  const num::Tensor& projection() const { return projection_; }
  const dsp::MelConfig& mel_config() const { return mel_; }

 private:
  std::size_t dim_;
  dsp::MelConfig mel_;
  num::Tensor projection_;  // [dim x 2 n_mels]
};

/// X_t_timb, channel-major [(n_mels + D_spk) x T_r]: shuffled reference mel
/// frames stacked over the broadcast speaker embedding.
struct TimbreSequence {
  num::Tensor frames;
  std::size_t n_mels = 0;

  std::size_t length() const { return frames.cols(); }
  std::size_t width() const { return frames.rows(); }
};

/// Stacks each (already shuffled) mel frame over the embedding.
TimbreSequence make_timbre_sequence(const dsp::MelSpectrogram& frames, const SpeakerEmbedding& e);

struct ReferenceConfig {
  double min_seconds = 2.0;
  double max_seconds = 4.0;
};

struct ReferenceSegment {
  std::size_t start = 0;
  std::size_t length = 0;
  std::uint64_t shuffle_seed = 0;
};

/// Segment choice used by build_reference_timbre: start is a multiple of hop.
ReferenceSegment pick_reference_segment(std::size_t n_samples, double sample_rate, std::size_t hop, std::uint64_t seed,
                                        const ReferenceConfig& cfg);

/// Random contiguous segment of ref with duration uniform in
/// [min_seconds, min(max_seconds, duration)], hop-aligned; mel of the segment,
/// normalized by `norm`, frame-shuffled, then concatenated with the embedding
/// of the whole reference.
TimbreSequence build_reference_timbre(const dsp::Waveform& ref, std::uint64_t seed, const SpeakerEmbedder& embedder,
                                      const ReferenceConfig& cfg = {}, const dsp::MelNorm& norm = {});

/// Same result from a precomputed analysis of the whole reference: `ref_mel`
/// is its raw (unnormalized) log-mel under `mel_cfg`, `embedding` its speaker
/// embedding. Segment frames are sliced, which is exact because segments start
/// on a hop boundary and frames are not centered.
TimbreSequence build_reference_timbre(const dsp::MelSpectrogram& ref_mel, std::size_t n_samples, double sample_rate,
                                      const SpeakerEmbedding& embedding, std::uint64_t seed,
                                      const dsp::MelConfig& mel_cfg, const ReferenceConfig& cfg = {},
                                      const dsp::MelNorm& norm = {});

}  // namespace flowvc::timbre
