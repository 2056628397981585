#include "flowvc/content/rvq.hpp"

#include <limits>

#include "flowvc/errors.hpp"

namespace flowvc::content {

Codebook Codebook::init(std::size_t size, std::size_t dim, num::Rng& rng, double stddev) {
  if (size < 2) throw InputError("codebook needs at least two entries");
  Codebook b;
  b.entries = num::normal_tensor({size, dim}, stddev, rng);
  b.counts = num::Tensor::zeros({size});
  b.sums = num::Tensor::zeros({size, dim});
  return b;
}

void Codebook::visit_state(const std::string& prefix, const num::ParamVisitor& fn) {
  fn(num::join_name(prefix, "entries"), entries);
  fn(num::join_name(prefix, "counts"), counts);
  fn(num::join_name(prefix, "sums"), sums);
}

std::size_t nearest_entry(const Codebook& book, const double* v) {
  const auto e = book.entries.data();
  const std::size_t d = book.dim();
  std::size_t best = 0;
  double best_dist = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < book.size(); ++k) {
    double dist = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double diff = e[k * d + j] - v[j];
      dist += diff * diff;
    }
    if (dist < best_dist) {
      best_dist = dist;
      best = k;
    }
  }
  return best;
}

QuantizedSequence rvq_quantize(const num::Tensor& x, const std::vector<Codebook>& books) {
  if (books.empty()) throw InputError("rvq: at least one stage required");
  if (x.ndim() != 2) throw InputError("rvq: input must be [D x T]");
  const std::size_t d = x.rows(), frames = x.cols();
  QuantizedSequence q;
  std::vector<double> residual = x.to_vector(), recon(d * frames, 0.0), column(d);
  for (const auto& book : books) {
    if (book.dim() != d) throw InputError("rvq: codebook dimension mismatch");
    q.residuals.push_back(num::Tensor::from({d, frames}, residual));
    std::vector<std::size_t> codes(frames);
    const auto e = book.entries.data();
    for (std::size_t t = 0; t < frames; ++t) {
      for (std::size_t j = 0; j < d; ++j) column[j] = residual[j * frames + t];
      const std::size_t k = nearest_entry(book, column.data());
      codes[t] = k;
      for (std::size_t j = 0; j < d; ++j) {
        recon[j * frames + t] += e[k * d + j];
        residual[j * frames + t] -= e[k * d + j];
      }
    }
    q.codes.push_back(std::move(codes));
    q.partial.push_back(num::Tensor::from({d, frames}, recon));
  }
  q.vectors = num::straight_through(x, q.partial.back());
  return q;
}

QuantizedSequence rvq_quantize(const num::Tensor& x, const Codebook& book, std::size_t n_stages) {
  if (n_stages == 0) throw InputError("rvq: at least one stage required");
  return rvq_quantize(x, std::vector<Codebook>(n_stages, book));
}

num::Tensor rvq_commit_loss(const num::Tensor& x, const QuantizedSequence& q) {
  const double inv_frames = 1.0 / static_cast<double>(x.cols());
  num::Tensor total;
  for (const auto& xhat : q.partial) {
    const auto diff = x - xhat;
    const auto term = num::scale(num::sum(diff * diff), inv_frames);
    total = total.defined() ? total + term : term;
  }
  return total;
}

void codebook_update_ema(Codebook& book, const num::Tensor& inputs, const std::vector<std::size_t>& codes,
                         const EmaConfig& cfg, num::Rng& rng) {
  if (!(cfg.decay > 0.0 && cfg.decay < 1.0)) throw InputError("EMA decay must lie in (0, 1)");
  const std::size_t v = book.size(), d = book.dim(), frames = inputs.cols();
  if (inputs.rows() != d || codes.size() != frames) throw InputError("EMA update: shape mismatch");
  auto counts = book.counts.mutable_data();
  auto sums = book.sums.mutable_data();
  auto entries = book.entries.mutable_data();
  const auto in = inputs.data();

  std::vector<double> batch_counts(v, 0.0), batch_sums(v * d, 0.0);
  for (std::size_t t = 0; t < frames; ++t) {
    const std::size_t k = codes[t];
    if (k >= v) throw InputError("EMA update: code out of range");
    batch_counts[k] += 1.0;
    for (std::size_t j = 0; j < d; ++j) batch_sums[k * d + j] += in[j * frames + t];
  }
  double total = 0.0;
  for (std::size_t k = 0; k < v; ++k) {
    counts[k] = cfg.decay * counts[k] + (1.0 - cfg.decay) * batch_counts[k];
    for (std::size_t j = 0; j < d; ++j) sums[k * d + j] = cfg.decay * sums[k * d + j] + (1.0 - cfg.decay) * batch_sums[k * d + j];
    total += counts[k];
  }
  for (std::size_t k = 0; k < v; ++k) {
    if (batch_counts[k] == 0.0) continue;
    const double smoothed = (counts[k] + cfg.epsilon) / (total + static_cast<double>(v) * cfg.epsilon) * total;
    for (std::size_t j = 0; j < d; ++j) entries[k * d + j] = sums[k * d + j] / smoothed;
  }
  if (frames == 0) return;
  for (std::size_t k = 0; k < v; ++k) {
    if (counts[k] >= cfg.dead_threshold) continue;
    const auto t = static_cast<std::size_t>(num::uniform_index(rng, frames));
    counts[k] = 1.0;
    for (std::size_t j = 0; j < d; ++j) {
      entries[k * d + j] = in[j * frames + t];
      sums[k * d + j] = in[j * frames + t];
    }
  }
}

}  // namespace flowvc::content
