#pragma once

#include "flowvc/dsp/audio.hpp"

namespace flowvc::dsp {

struct PitchConfig {
  double frame_seconds = 0.040;
  double hop_seconds = 0.010;
  /// Frames whose normalized autocorrelation peak is below this are unvoiced.
  double voicing_threshold = 0.3;
};

/// Median fundamental frequency (Hz) over voiced frames, 0 when none are
/// voiced. Per frame: mean-removed biased autocorrelation, highest peak of
/// r[lag] / r[0] for lags in [sr/f_hi, sr/f_lo], parabolic refinement.
double estimate_f0(const Waveform& w, double f_lo, double f_hi, const PitchConfig& cfg = {});

}  // namespace flowvc::dsp
