#pragma once

#include <filesystem>
#include <vector>

namespace flowvc::dsp {

struct Waveform {
  std::vector<double> samples;  // save_wav requires [-1, 1]
  double sample_rate = 16000.0;

  double duration() const { return static_cast<double>(samples.size()) / sample_rate; }
  /// Throws InputError unless sample_rate > 0 and every |sample| <= 1.
  void validate() const;
};

/// PCM16 mono RIFF/WAVE. Samples decode as int16 / 32768.
Waveform load_wav(const std::filesystem::path& path);
/// Encodes round(x * 32768) clamped to the int16 range.
void save_wav(const std::filesystem::path& path, const Waveform& w);

/// Scales w down uniformly so its peak is at most `ceiling`.
Waveform limit_peak(Waveform w, double ceiling = 1.0);

/// Snaps samples onto the PCM16 grid so a save/load cycle is lossless.
Waveform quantize_pcm16(Waveform w);

}  // namespace flowvc::dsp
