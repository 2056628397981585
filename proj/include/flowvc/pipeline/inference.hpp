#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "flowvc/pipeline/corpus.hpp"
#include "flowvc/pipeline/model.hpp"

namespace flowvc::pipeline {

struct ConvertOptions {
  /// Unset fields fall back to the model config (cfm.steps, cfm.guidance).
  std::optional<std::size_t> steps;
  std::optional<double> guidance;
  std::uint64_t seed = 0;
  /// Reference segment bounds; unset uses the training bounds.
  std::optional<double> ref_min_seconds;
  std::optional<double> ref_max_seconds;
  /// Skip Griffin-Lim (mel only).
  bool render_audio = true;
};

struct Conversion {
  dsp::MelSpectrogram mel;  // predicted log-mel (denormalized), [T_source x n_mels]
  dsp::Waveform audio;      // empty when render_audio is false
  double mel_seconds = 0.0;
  double vocoder_seconds = 0.0;
};

/// Content of `source` (aligned by `source_labels`) in the voice of `reference`.
Conversion convert(const Model& model, const dsp::Waveform& source,
                   const std::vector<content::SymbolSegment>& source_labels, const dsp::Waveform& reference,
                   const ConvertOptions& opts = {});

/// Nearest-neighbour symbol classifier over labelled corpus frames, using
/// cepstra c1..c19 (DCT-II of the log-mel) so that frame loudness does not
/// count. A frame that appears in the bank is classified by its own label.
class ContentOracle {
 public:
  ContentOracle(const Corpus& corpus, const dsp::MelConfig& mel);
  std::vector<std::size_t> classify(const dsp::MelSpectrogram& m) const;
  /// Fraction of frames of `audio` whose class equals the frame-center label.
  double accuracy(const dsp::Waveform& audio, const std::vector<content::SymbolSegment>& labels) const;

 private:
  dsp::MelConfig mel_;
  std::size_t dims_ = 0;
  std::vector<double> bank_;  // [n x dims_]
  std::vector<std::size_t> labels_;
};

/// One conversion to be scored.
struct ScoredItem {
  dsp::Waveform converted;
  dsp::Waveform source;
  std::vector<content::SymbolSegment> source_labels;
  dsp::Waveform target_reference;
  /// Predicted and ground-truth log-mel, both [T x n_mels]; set for
  /// reconstruction runs (reference from the source speaker).
  std::optional<dsp::MelSpectrogram> predicted_mel;
  std::optional<dsp::MelSpectrogram> ground_truth_mel;
};

struct EvalReport {
  std::size_t n_items = 0;
  double secs_proxy = 0.0;      // mean cos(converted, target reference)
  double secs_to_source = 0.0;  // mean cos(converted, source)
  double mel_l2 = 0.0;          // mean per-frame L2, reconstruction items only (NaN if none)
  double f0_ratio = 0.0;        // median over items of f0(converted) / f0(target)
  double content_acc = 0.0;     // over all frames of all items
  double rtf_mel = 0.0;
  double rtf_vocoder = 0.0;

  /// "metric<TAB>value" lines.
  std::string to_tsv() const;
};

EvalReport score(const std::vector<ScoredItem>& items, const timbre::SpeakerEmbedder& embedder,
                 const ContentOracle& oracle);

struct EvalOptions {
  /// Cross-speaker pairs: each speaker's first `sources_per_speaker`
  /// utterances converted to every other speaker.
  std::size_t sources_per_speaker = 1;
  /// Reconstruction runs per speaker (reference from the same speaker).
  std::size_t reconstructions_per_speaker = 1;
  ConvertOptions convert;
};

/// Converts corpus utterances across and within speakers and scores them.
/// RTF is wall-clock per stage over the converted duration.
EvalReport evaluate(const Model& model, const Corpus& corpus, const EvalOptions& opts = {});

}  // namespace flowvc::pipeline
