#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "flowvc/content/providers.hpp"
#include "flowvc/dsp/audio.hpp"

namespace flowvc::pipeline {

/// Speaker-specific rendering parameters. Symbol formants are shared by all
/// speakers; a voice differs in pitch, spectral tilt, one extra resonance
/// and vibrato.
struct VoiceProfile {
  double f0 = 120.0;                // Hz
  double tilt = 1.0;                // spectral slope, amplitude ~ (f / 500)^-tilt
  double resonance_hz = 3200.0;     // speaker resonance
  double resonance_gain = 2.0;      // peak amplitude gain of that resonance
  double vibrato_hz = 5.0;
  double vibrato_depth = 0.015;     // relative f0 excursion

  bool operator==(const VoiceProfile&) const = default;
};

struct SynthConfig {
  double sample_rate = 16000.0;
  std::size_t n_symbols = 12;
  double min_symbol_seconds = 0.15;
  double max_symbol_seconds = 0.30;
  double min_utt_seconds = 3.0;
  double max_utt_seconds = 4.0;
  double peak = 0.5;
};

struct Utterance {
  std::string id;
  std::size_t speaker = 0;
  dsp::Waveform audio;
  std::vector<content::SymbolSegment> segments;  // contiguous, covering every sample
};

struct Corpus {
  std::vector<VoiceProfile> speakers;
  std::vector<Utterance> utterances;

  std::vector<std::size_t> utterances_of(std::size_t speaker) const;
};

/// First and second formant of each symbol (F1 from 4 values x F2 from 3).
std::pair<double, double> symbol_formants(std::size_t symbol);

/// Spectral envelope magnitude of `symbol` spoken by `voice` at frequency f.
double envelope(std::size_t symbol, const VoiceProfile& voice, double f);

/// Voices with base f0 spread geometrically over [110, 260] Hz (rounded to
/// 10 Hz when that keeps them distinct) and disjoint tilt/resonance values.
/// n = 4 gives f0 = 110, 150, 200, 260.
std::vector<VoiceProfile> default_voices(std::size_t n);

/// Additive harmonic rendering of a symbol sequence: harmonics of the
/// vibrato-modulated f0 weighted by the envelope, with log-amplitude
/// cross-fades of 15 ms at symbol boundaries. Quantized to PCM16.
dsp::Waveform render(const VoiceProfile& voice, const std::vector<content::SymbolSegment>& segments,
                     const SynthConfig& cfg);

/// Random symbols (no immediate repeats) with uniform durations; the last
/// segment absorbs the remainder so durations sum to the utterance length.
std::vector<content::SymbolSegment> random_script(num::Rng& rng, const SynthConfig& cfg);

/// n_utts utterances per voice; a pure function of its arguments.
Corpus synth_corpus(const SynthConfig& cfg, const std::vector<VoiceProfile>& voices, std::size_t n_utts,
                    std::uint64_t seed);
/// Convenience form over default_voices(n_speakers). Requires n_speakers >= 2.
Corpus synth_corpus(const SynthConfig& cfg, std::size_t n_speakers, std::size_t n_utts, std::uint64_t seed);

/// Label file: one "begin<TAB>end<TAB>symbol" line per segment (samples).
void save_labels(const std::filesystem::path& path, const std::vector<content::SymbolSegment>& segments);
std::vector<content::SymbolSegment> load_labels(const std::filesystem::path& path);
/// "<dir>/<stem>.lab" next to a WAV path.
std::filesystem::path labels_path_for(const std::filesystem::path& wav);

/// DIR/speakers.tsv, DIR/corpus.tsv, DIR/<id>.wav and DIR/<id>.lab.
void save_corpus(const Corpus& corpus, const std::filesystem::path& dir);
Corpus load_corpus(const std::filesystem::path& dir);

}  // namespace flowvc::pipeline
