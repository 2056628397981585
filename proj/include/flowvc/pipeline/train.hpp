#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <stdexcept>
#include <vector>

#include "flowvc/numerics/optim.hpp"
#include "flowvc/pipeline/corpus.hpp"
#include "flowvc/pipeline/model.hpp"

namespace flowvc::pipeline {

/// Raised when a training step produces a non-finite loss.
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One training example: a hop-aligned crop of a source utterance and a
/// timbre sequence from another utterance of the same speaker.
struct TrainItem {
  dsp::MelSpectrogram mel;                       // normalized, [T x n_mels]
  std::vector<content::SymbolSegment> segments;  // crop-relative
  std::size_t n_samples = 0;
  timbre::TimbreSequence reference;
};

struct LossTerms {
  num::Tensor total;
  num::Tensor cfm;
  num::Tensor vq;
};

/// L_cfm + lambda * L_vq.
LossTerms combine_losses(const num::Tensor& cfm, const num::Tensor& vq, double lambda);

struct BatchLoss {
  LossTerms terms;
  std::vector<Conditioning> conditioning;  // per item, for codebook updates
};

/// Mean CFM loss and mean commitment loss over the batch, combined with the
/// configured lambda. Draws t, noise and condition dropout from rng.
BatchLoss total_loss(const std::vector<TrainItem>& batch, const Model& model, num::Rng& rng);

struct StepStats {
  std::uint64_t step = 0;
  double total = 0.0;
  double cfm = 0.0;
  double vq = 0.0;
  /// L2 norm of the fusion-module gradient before the update.
  double fusion_grad_norm = 0.0;
};

/// "step<TAB>L_total<TAB>L_cfm<TAB>L_vq" with 17 significant digits.
std::string format_log_line(const StepStats& s);

/// Per-utterance analysis cached by a training session.
struct UtteranceAnalysis {
  dsp::MelSpectrogram raw;
  dsp::MelSpectrogram normalized;
  timbre::SpeakerEmbedding embedding;
};

/// Training state over a corpus: model, optimizer and step counter. Step k
/// draws its batch from make_rng(seeds.data, {k}), so resuming from a
/// checkpoint continues the exact sequence.
class TrainingSession {
 public:
  /// Fresh model; fits the mel normalization on the corpus.
  TrainingSession(const RunConfig& cfg, const Corpus& corpus);
  /// Resumes model and optimizer state.
  TrainingSession(const Checkpoint& ckpt, const Corpus& corpus);

  /// Runs one optimizer step. Throws TrainingError on a non-finite loss.
  StepStats step();
  /// Runs steps until `target` steps are done, appending log lines to `log`
  /// (if non-null) and calling `on_checkpoint` every checkpoint_every steps.
  std::vector<StepStats> run(std::uint64_t target, std::ostream* log = nullptr,
                             const std::function<void(const Checkpoint&)>& on_checkpoint = {});

  /// Batch for a given step, as step() would draw it.
  std::vector<TrainItem> batch_for(std::uint64_t step) const;

  Checkpoint checkpoint();
  std::uint64_t steps_done() const { return step_; }
  Model& model() { return model_; }
  const Model& model() const { return model_; }
  const num::AdamW& optimizer() const { return opt_; }

 private:
  void prepare();
  static num::AdamConfig adam_config(const RunConfig& cfg);

  Model model_;
  const Corpus* corpus_;
  num::AdamW opt_;
  std::uint64_t step_ = 0;
  std::vector<UtteranceAnalysis> analyses_;  // one per utterance
  std::vector<std::vector<std::size_t>> by_speaker_;
  std::size_t crop_samples_ = 0;
  std::size_t crop_frames_ = 0;
  std::size_t align_ = 0;
};

/// Throws InputError unless every speaker has at least two utterances, each
/// long enough for a training crop and a reference segment.
void check_trainable(const Corpus& corpus, const RunConfig& cfg);

}  // namespace flowvc::pipeline
