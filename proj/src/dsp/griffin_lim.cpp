#include "flowvc/dsp/griffin_lim.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>

#include "flowvc/numerics/random.hpp"

namespace flowvc::dsp {

namespace {
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
}  // namespace

std::vector<double> nnls(const std::vector<double>& a, std::size_t rows, std::size_t cols,
                         const std::vector<double>& b, std::size_t max_iter) {
  const Eigen::Map<const RowMat> A(a.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  const Eigen::Map<const Eigen::VectorXd> B(b.data(), static_cast<Eigen::Index>(rows));
  if (max_iter == 0) max_iter = 3 * cols;

  Eigen::VectorXd x = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(cols));
  std::vector<char> passive(cols, 0), blocked(cols, 0);
  Eigen::VectorXd w = A.transpose() * B;
  const double tol = 1e-12 * std::max(1.0, w.cwiseAbs().maxCoeff());

  for (std::size_t iter = 0; iter < max_iter; ++iter) {
    Eigen::Index j = -1;
    double best = tol;
    for (std::size_t i = 0; i < cols; ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      if (!passive[i] && !blocked[i] && w[ii] > best) {
        best = w[ii];
        j = ii;
      }
    }
    if (j < 0) break;
    passive[static_cast<std::size_t>(j)] = 1;

    bool first = true;
    while (true) {
      std::vector<Eigen::Index> idx;
      for (std::size_t i = 0; i < cols; ++i)
        if (passive[i]) idx.push_back(static_cast<Eigen::Index>(i));
      Eigen::MatrixXd sub(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(idx.size()));
      for (std::size_t c = 0; c < idx.size(); ++c) sub.col(static_cast<Eigen::Index>(c)) = A.col(idx[c]);
      const Eigen::VectorXd s = sub.colPivHouseholderQr().solve(B);

      if (s.minCoeff() > 0.0) {
        x.setZero();
        for (std::size_t c = 0; c < idx.size(); ++c) x[idx[c]] = s[static_cast<Eigen::Index>(c)];
        break;
      }
      if (first) {
        // The entering column cannot carry positive weight (numerically
        // dependent on the passive set); exclude it until the next change.
        const auto pos = std::find(idx.begin(), idx.end(), j) - idx.begin();
        if (s[pos] <= 0.0) {
          passive[static_cast<std::size_t>(j)] = 0;
          blocked[static_cast<std::size_t>(j)] = 1;
          break;
        }
      }
      first = false;
      double alpha = 1.0;
      for (std::size_t c = 0; c < idx.size(); ++c) {
        const double sc = s[static_cast<Eigen::Index>(c)];
        if (sc <= 0.0) {
          const double xc = x[idx[c]];
          alpha = std::min(alpha, xc / (xc - sc));
        }
      }
      for (std::size_t c = 0; c < idx.size(); ++c) {
        auto& xc = x[idx[c]];
        xc += alpha * (s[static_cast<Eigen::Index>(c)] - xc);
        if (xc <= 1e-15) {
          xc = 0.0;
          passive[static_cast<std::size_t>(idx[c])] = 0;
        }
      }
    }
    if (!blocked[static_cast<std::size_t>(j)]) std::fill(blocked.begin(), blocked.end(), 0);
    w = A.transpose() * (B - A * x);
  }
  return {x.data(), x.data() + x.size()};
}

std::vector<std::vector<double>> mel_to_linear(const MelSpectrogram& m) {
  const auto& cfg = m.config;
  const auto fb = mel_filterbank(cfg);
  const std::vector<double> fbv = fb.to_vector();
  const std::size_t bins = cfg.n_bins(), mels = cfg.n_mels;
  std::vector<std::vector<double>> out(m.num_frames());
  std::vector<double> target(mels);
  for (std::size_t t = 0; t < m.num_frames(); ++t) {
    for (std::size_t k = 0; k < mels; ++k) target[k] = std::exp(m.frames.at(t, k));
    out[t] = nnls(fbv, mels, bins, target);
  }
  return out;
}

namespace {

// Frobenius norm over the two-sided spectrum: interior bins count twice.
double bin_weight(std::size_t k, std::size_t bins) { return (k == 0 || k + 1 == bins) ? 1.0 : 2.0; }

}  // namespace

GriffinLimResult griffin_lim(const MelSpectrogram& m, std::size_t n_iters, std::uint64_t seed) {
  const auto& cfg = m.config;
  const auto target = mel_to_linear(m);
  const std::size_t frames = target.size(), bins = cfg.n_bins();

  double target_norm = 0.0;
  for (const auto& row : target)
    for (std::size_t k = 0; k < bins; ++k) target_norm += bin_weight(k, bins) * row[k] * row[k];
  target_norm = std::sqrt(target_norm);

  auto rng = num::make_rng(seed, {0x6c});
  std::vector<std::vector<std::complex<double>>> spec(frames, std::vector<std::complex<double>>(bins));
  for (std::size_t t = 0; t < frames; ++t)
    for (std::size_t k = 0; k < bins; ++k) spec[t][k] = std::polar(target[t][k], 2.0 * M_PI * num::uniform01(rng));

  GriffinLimResult result;
  std::vector<double> signal = istft(spec, cfg);
  for (std::size_t it = 0; it < n_iters; ++it) {
    const auto analysis = stft(signal, cfg);
    double err = 0.0;
    for (std::size_t t = 0; t < frames; ++t) {
      for (std::size_t k = 0; k < bins; ++k) {
        const double mag = std::abs(analysis[t][k]);
        err += bin_weight(k, bins) * (mag - target[t][k]) * (mag - target[t][k]);
        spec[t][k] = mag > 0.0 ? analysis[t][k] * (target[t][k] / mag) : std::complex<double>(target[t][k], 0.0);
      }
    }
    result.spectral_convergence.push_back(target_norm > 0.0 ? std::sqrt(err) / target_norm : std::sqrt(err));
    signal = istft(spec, cfg);
  }

  result.waveform = Waveform{std::move(signal), cfg.sample_rate};
  return result;
}

}  // namespace flowvc::dsp
