#pragma once

#include <vector>

#include "flowvc/cfm/unet.hpp"
#include "flowvc/content/fusion.hpp"
#include "flowvc/content/providers.hpp"
#include "flowvc/content/rvq.hpp"
#include "flowvc/pipeline/checkpoint.hpp"
#include "flowvc/pipeline/config.hpp"
#include "flowvc/timbre/modules.hpp"
#include "flowvc/timbre/speaker.hpp"

namespace flowvc::pipeline {

/// Everything the decoder is conditioned on for one source utterance.
struct Conditioning {
  content::FeatureSequence ppg;
  content::QuantizedSequence quantized;
  content::ContentSequence content;
  timbre::TimbreSequence reference;
  cfm::ConditionSet condition;
};

/// The full conversion model. Frozen parts (PPG, SSL and speaker stand-ins)
/// are rebuilt from the config seeds; codebooks and the mel normalization are
/// non-gradient state; the four modules below are trained.
class Model {
 public:
  static Model init(const RunConfig& cfg);
  /// Rebuilds from a checkpoint (config text plus model records). Throws
  /// CheckpointError on missing, extra or misshaped records.
  static Model from_checkpoint(const Checkpoint& ckpt);

  const RunConfig& config() const { return cfg_; }

  const content::PpgProvider& ppg() const { return ppg_; }
  const content::SslProvider& ssl() const { return ssl_; }
  const timbre::SpeakerEmbedder& embedder() const { return embedder_; }

  std::vector<content::Codebook>& codebooks() { return codebooks_; }
  const std::vector<content::Codebook>& codebooks() const { return codebooks_; }
  dsp::MelNorm& mel_norm() { return norm_; }
  const dsp::MelNorm& mel_norm() const { return norm_; }

  content::AdaptiveFusion& fusion() { return fusion_; }
  const content::AdaptiveFusion& fusion() const { return fusion_; }
  const timbre::MemoryAugment& memory() const { return memory_; }
  const timbre::ContextAwareFusion& context() const { return context_; }
  const cfm::VectorFieldNet& field() const { return field_; }

  /// Trainable parameters: fusion.*, memory.*, context.*, field.*
  void visit_parameters(const num::ParamVisitor& fn);
  std::vector<num::Tensor> parameters();
  /// Codebook statistics and the mel normalization ("rvq.*", "mel_norm").
  void visit_state(const num::ParamVisitor& fn);

  /// Normalized log-mel of a waveform, [T x n_mels].
  dsp::MelSpectrogram analyze(const dsp::Waveform& w) const;

  /// Conditioning for a source (normalized mel plus its alignment over
  /// n_samples) and an already-built reference timbre sequence.
  Conditioning condition(const dsp::MelSpectrogram& source_mel, const std::vector<content::SymbolSegment>& segments,
                         std::size_t n_samples, timbre::TimbreSequence reference) const;
  /// Random shuffled reference segment of `ref`, as used by the timbre modules.
  timbre::TimbreSequence reference_timbre(const dsp::Waveform& ref, std::uint64_t seed) const;
  /// Same, from the reference's raw log-mel, sample count and embedding.
  timbre::TimbreSequence reference_timbre(const dsp::MelSpectrogram& raw_mel, std::size_t n_samples,
                                          const timbre::SpeakerEmbedding& embedding, std::uint64_t seed) const;

  /// Model records (parameters, then state) appended to `out`.
  void export_records(std::vector<TensorRecord>& out);
  /// Copies records back by name; every model record must be present.
  void import_records(const Checkpoint& ckpt);

 private:
  explicit Model(const RunConfig& cfg);

  RunConfig cfg_;
  content::PpgProvider ppg_;
  content::SslProvider ssl_;
  timbre::SpeakerEmbedder embedder_;
  std::vector<content::Codebook> codebooks_;
  dsp::MelNorm norm_;
  content::AdaptiveFusion fusion_;
  timbre::MemoryAugment memory_;
  timbre::ContextAwareFusion context_;
  cfm::VectorFieldNet field_;
};

/// Mean and standard deviation of every log-mel value in the waveforms.
dsp::MelNorm fit_mel_norm(const std::vector<const dsp::Waveform*>& waves, const dsp::MelConfig& cfg);

/// Mel [T x n_mels] to the decoder's channel-major layout [n_mels x T] and back.
num::Tensor to_channels(const dsp::MelSpectrogram& m);
dsp::MelSpectrogram from_channels(const num::Tensor& x, const dsp::MelConfig& cfg);

}  // namespace flowvc::pipeline
