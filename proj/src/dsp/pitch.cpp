#include "flowvc/dsp/pitch.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "flowvc/errors.hpp"

namespace flowvc::dsp {

double estimate_f0(const Waveform& w, double f_lo, double f_hi, const PitchConfig& cfg) {
  const double sr = w.sample_rate;
  if (!(f_lo > 0.0 && f_lo < f_hi && f_hi < sr / 2.0)) {
    throw InputError("estimate_f0: require 0 < f_lo < f_hi < sample_rate / 2");
  }
  const auto frame = static_cast<std::size_t>(std::lround(cfg.frame_seconds * sr));
  const auto hop = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(cfg.hop_seconds * sr)));
  const auto lag_min = static_cast<std::size_t>(std::ceil(sr / f_hi));
  const auto lag_max = std::min(frame - 2, static_cast<std::size_t>(std::floor(sr / f_lo)));
  if (w.samples.size() < frame || lag_min >= lag_max) return 0.0;

  std::vector<double> voiced;
  std::vector<double> x(frame), r(lag_max + 2);
  for (std::size_t start = 0; start + frame <= w.samples.size(); start += hop) {
    double mean = 0.0;
    for (std::size_t i = 0; i < frame; ++i) mean += w.samples[start + i];
    mean /= static_cast<double>(frame);
    for (std::size_t i = 0; i < frame; ++i) x[i] = w.samples[start + i] - mean;
    for (std::size_t lag = 0; lag <= lag_max + 1; ++lag) {
      if (lag != 0 && (lag + 1 < lag_min || lag > lag_max + 1)) continue;
      double acc = 0.0;
      for (std::size_t i = 0; i + lag < frame; ++i) acc += x[i] * x[i + lag];
      r[lag] = acc;
    }
    if (r[0] <= 1e-12 * static_cast<double>(frame)) continue;

    std::size_t best = lag_min;
    for (std::size_t lag = lag_min; lag <= lag_max; ++lag) {
      if (r[lag] > r[best]) best = lag;
    }
    if (r[best] / r[0] < cfg.voicing_threshold) continue;

    double lag = static_cast<double>(best);
    if (best > lag_min && best < lag_max) {
      const double a = r[best - 1], b = r[best], c = r[best + 1];
      const double denom = a - 2.0 * b + c;
      if (denom < 0.0) lag += 0.5 * (a - c) / denom;
    }
    voiced.push_back(sr / lag);
  }
  if (voiced.empty()) return 0.0;
  std::sort(voiced.begin(), voiced.end());
  const std::size_t n = voiced.size();
  return n % 2 ? voiced[n / 2] : 0.5 * (voiced[n / 2 - 1] + voiced[n / 2]);
}

}  // namespace flowvc::dsp
