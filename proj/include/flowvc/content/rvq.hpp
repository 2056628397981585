#pragma once

#include <cstddef>
#include <vector>

#include "flowvc/numerics/layers.hpp"
#include "flowvc/numerics/random.hpp"

namespace flowvc::content {

/// One quantizer stage. Entries are rows; EMA statistics are kept alongside.
struct Codebook {
  num::Tensor entries;  // [V x D]
  num::Tensor counts;   // [V]
  num::Tensor sums;     // [V x D]

  /// Gaussian entries with zero counts, so the first EMA update reseeds every
  /// entry that receives no assignment from the batch.
  static Codebook init(std::size_t size, std::size_t dim, num::Rng& rng, double stddev = 1.0);
  std::size_t size() const { return entries.rows(); }
  std::size_t dim() const { return entries.cols(); }
  void visit_state(const std::string& prefix, const num::ParamVisitor& fn);
};

struct QuantizedSequence {
  /// codes[stage][t]
  std::vector<std::vector<std::size_t>> codes;
  /// Cumulative reconstructions after each stage, each [D x T], detached.
  std::vector<num::Tensor> partial;
  /// Residual entering each stage, each [D x T], detached.
  std::vector<num::Tensor> residuals;
  /// Straight-through output: forward value is the final reconstruction,
  /// gradient flows to the quantizer input.
  num::Tensor vectors;

  std::size_t stages() const { return codes.size(); }
  const num::Tensor& reconstruction() const { return partial.back(); }
};

/// Index of the entry nearest to `v` (squared Euclidean, lowest index on ties).
std::size_t nearest_entry(const Codebook& book, const double* v);

/// Residual vector quantization of x [D x T]: stage i quantizes the residual
/// left by stages 0..i-1 against books[i].
QuantizedSequence rvq_quantize(const num::Tensor& x, const std::vector<Codebook>& books);
/// Same, with one codebook shared by all n_stages stages.
QuantizedSequence rvq_quantize(const num::Tensor& x, const Codebook& book, std::size_t n_stages);

/// sum_i ||x - xhat_i||^2 averaged over frames; xhat_i are constants.
num::Tensor rvq_commit_loss(const num::Tensor& x, const QuantizedSequence& q);

struct EmaConfig {
  double decay = 0.99;
  double epsilon = 1e-5;
  double dead_threshold = 1e-3;
};

/// EMA codebook learning for one stage. inputs [D x T] are the vectors this
/// stage quantized, codes their assignments. Counts and sums decay for every
/// entry; only entries assigned in this batch are recomputed (with Laplace
/// smoothing of counts). Entries whose count falls below dead_threshold are
/// replaced by random batch vectors with count 1.
void codebook_update_ema(Codebook& book, const num::Tensor& inputs, const std::vector<std::size_t>& codes,
                         const EmaConfig& cfg, num::Rng& rng);

}  // namespace flowvc::content
