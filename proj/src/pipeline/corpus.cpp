#include "flowvc/pipeline/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include "flowvc/errors.hpp"
#include "flowvc/numerics/random.hpp"

namespace flowvc::pipeline {

namespace {

constexpr double kF1[4] = {250.0, 450.0, 650.0, 850.0};
constexpr double kF2[3] = {1200.0, 1900.0, 2600.0};
constexpr double kF3 = 2900.0;
constexpr double kCrossfadeSeconds = 0.015;
constexpr std::size_t kBlock = 16;

// Magnitude of a second-order resonance normalized to 1 at DC.
double resonance(double f, double center, double bandwidth) {
  const double r = f / center;
  const double q = f * bandwidth / (center * center);
  return 1.0 / std::sqrt((1.0 - r * r) * (1.0 - r * r) + q * q);
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, '\t')) out.push_back(field);
  return out;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double to_double(const std::string& s, const std::string& where) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw InputError(where + ": expected a number, got '" + s + "'");
}

std::size_t to_index(const std::string& s, const std::string& where) {
  if (s.empty() || !std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; })) {
    throw InputError(where + ": expected a non-negative integer, got '" + s + "'");
  }
  return static_cast<std::size_t>(std::stoull(s));
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

std::string utterance_id(std::size_t speaker, std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "s%02zu_u%03zu", speaker, index);
  return buf;
}

}  // namespace

std::vector<std::size_t> Corpus::utterances_of(std::size_t speaker) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < utterances.size(); ++i) {
    if (utterances[i].speaker == speaker) out.push_back(i);
  }
  return out;
}

std::pair<double, double> symbol_formants(std::size_t symbol) {
  if (symbol >= 12) throw InputError("symbol index " + std::to_string(symbol) + " out of range");
  return {kF1[symbol % 4], kF2[symbol / 4]};
}

double envelope(std::size_t symbol, const VoiceProfile& voice, double f) {
  const auto [f1, f2] = symbol_formants(symbol);
  const double formants = resonance(f, f1, 90.0) * resonance(f, f2, 140.0) * resonance(f, kF3, 250.0);
  const double tilt = std::pow(1.0 + (f / 500.0) * (f / 500.0), -0.5 * voice.tilt);
  const double extra = 1.0 + (voice.resonance_gain - 1.0) / (1.0 + std::pow((f - voice.resonance_hz) / 150.0, 2));
  return formants * tilt * extra;
}

std::vector<VoiceProfile> default_voices(std::size_t n) {
  if (n < 2) throw InputError("a corpus needs at least two speakers");
  std::vector<double> f0(n);
  bool distinct = true;
  for (std::size_t i = 0; i < n; ++i) {
    const double u = static_cast<double>(i) / static_cast<double>(n - 1);
    f0[i] = 10.0 * std::round(11.0 * std::pow(260.0 / 110.0, u));
    if (i > 0 && f0[i] <= f0[i - 1]) distinct = false;
  }
  if (!distinct) {
    for (std::size_t i = 0; i < n; ++i) {
      f0[i] = 110.0 * std::pow(260.0 / 110.0, static_cast<double>(i) / static_cast<double>(n - 1));
    }
  }
  std::vector<VoiceProfile> voices(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = static_cast<double>(i) / static_cast<double>(n - 1);
    voices[i].f0 = f0[i];
    voices[i].tilt = 0.7 + 0.6 * u;
    voices[i].resonance_hz = 2600.0 + 1400.0 * u;
    voices[i].vibrato_hz = 4.5 + 2.0 * u;
  }
  return voices;
}

std::vector<content::SymbolSegment> random_script(num::Rng& rng, const SynthConfig& cfg) {
  if (cfg.n_symbols < 2 || cfg.n_symbols > 12) throw InputError("synthesis supports 2 to 12 symbols");
  const double sr = cfg.sample_rate;
  const auto span = [&](double lo, double hi) {
    const auto a = static_cast<std::size_t>(std::lround(lo * sr));
    const auto b = static_cast<std::size_t>(std::lround(hi * sr));
    return a + static_cast<std::size_t>(num::uniform_index(rng, b - a + 1));
  };
  const std::size_t total = span(cfg.min_utt_seconds, cfg.max_utt_seconds);
  const auto min_len = static_cast<std::size_t>(std::lround(cfg.min_symbol_seconds * sr));

  std::vector<content::SymbolSegment> segs;
  std::size_t pos = 0;
  while (pos < total) {
    std::size_t symbol = num::uniform_index(rng, cfg.n_symbols);
    if (!segs.empty() && symbol == segs.back().symbol) symbol = (symbol + 1) % cfg.n_symbols;
    const std::size_t len = span(cfg.min_symbol_seconds, cfg.max_symbol_seconds);
    if (total - pos < len + min_len) {
      // Remainder too short for another symbol: this one ends the utterance.
      segs.push_back({symbol, pos, total});
      break;
    }
    segs.push_back({symbol, pos, pos + len});
    pos += len;
  }
  return segs;
}

dsp::Waveform render(const VoiceProfile& voice, const std::vector<content::SymbolSegment>& segments,
                     const SynthConfig& cfg) {
  if (segments.empty()) throw InputError("render: empty symbol script");
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const bool contiguous = i == 0 ? segments[i].begin == 0 : segments[i].begin == segments[i - 1].end;
    if (!contiguous || segments[i].end <= segments[i].begin) throw InputError("render: segments must tile the signal");
  }
  const double sr = cfg.sample_rate;
  const std::size_t n = segments.back().end;
  const std::size_t harmonics =
      static_cast<std::size_t>(std::floor(0.45 * sr / (voice.f0 * (1.0 + voice.vibrato_depth))));
  const double fade = kCrossfadeSeconds * sr;
  const double two_pi = 2.0 * std::numbers::pi;

  // Log-amplitude of harmonic k at sample i, blending neighbouring symbols
  // within the cross-fade window around each boundary.
  std::size_t seg = 0;
  const auto f0_at = [&](double i) {
    return voice.f0 * (1.0 + voice.vibrato_depth * std::sin(two_pi * voice.vibrato_hz * i / sr));
  };
  const auto amplitudes = [&](std::size_t i, std::vector<double>& out) {
    while (seg + 1 < segments.size() && i >= segments[seg].end) ++seg;
    const double f0 = f0_at(static_cast<double>(i));
    std::size_t other = seg;
    double mix = 0.0;  // weight of `other`
    const double t = static_cast<double>(i);
    if (seg + 1 < segments.size() && t > static_cast<double>(segments[seg].end) - fade / 2) {
      other = seg + 1;
      mix = (t - (static_cast<double>(segments[seg].end) - fade / 2)) / fade;
    } else if (seg > 0 && t < static_cast<double>(segments[seg].begin) + fade / 2) {
      other = seg - 1;
      mix = 1.0 - (t - (static_cast<double>(segments[seg].begin) - fade / 2)) / fade;
    }
    mix = std::clamp(mix, 0.0, 1.0);
    for (std::size_t k = 1; k <= harmonics; ++k) {
      const double f = static_cast<double>(k) * f0;
      const double a = std::log(envelope(segments[seg].symbol, voice, f));
      const double b = std::log(envelope(segments[other].symbol, voice, f));
      out[k - 1] = std::exp((1.0 - mix) * a + mix * b);
    }
  };

  std::vector<double> out(n, 0.0);
  std::vector<double> a0(harmonics), a1(harmonics);
  amplitudes(0, a0);
  double phase = 0.0;
  for (std::size_t start = 0; start < n; start += kBlock) {
    const std::size_t stop = std::min(n, start + kBlock);
    amplitudes(stop, a1);
    for (std::size_t i = start; i < stop; ++i) {
      const double w = static_cast<double>(i - start) / static_cast<double>(kBlock);
      double s = 0.0;
      for (std::size_t k = 0; k < harmonics; ++k) {
        s += ((1.0 - w) * a0[k] + w * a1[k]) * std::sin(static_cast<double>(k + 1) * phase);
      }
      out[i] = s;
      phase += two_pi * f0_at(static_cast<double>(i)) / sr;
      if (phase > two_pi) phase -= two_pi;
    }
    std::swap(a0, a1);
  }

  double peak = 0.0;
  for (const double v : out) peak = std::max(peak, std::abs(v));
  if (peak > 0.0) {
    for (auto& v : out) v *= cfg.peak / peak;
  }
  return dsp::quantize_pcm16(dsp::Waveform{std::move(out), sr});
}

Corpus synth_corpus(const SynthConfig& cfg, const std::vector<VoiceProfile>& voices, std::size_t n_utts,
                    std::uint64_t seed) {
  if (voices.size() < 2) throw InputError("a corpus needs at least two speakers");
  if (n_utts == 0) throw InputError("a corpus needs at least one utterance per speaker");
  Corpus c;
  c.speakers = voices;
  for (std::size_t s = 0; s < voices.size(); ++s) {
    for (std::size_t u = 0; u < n_utts; ++u) {
      auto rng = num::make_rng(seed, {s, u});
      Utterance utt;
      utt.id = utterance_id(s, u);
      utt.speaker = s;
      utt.segments = random_script(rng, cfg);
      utt.audio = render(voices[s], utt.segments, cfg);
      c.utterances.push_back(std::move(utt));
    }
  }
  return c;
}

Corpus synth_corpus(const SynthConfig& cfg, std::size_t n_speakers, std::size_t n_utts, std::uint64_t seed) {
  return synth_corpus(cfg, default_voices(n_speakers), n_utts, seed);
}

void save_labels(const std::filesystem::path& path, const std::vector<content::SymbolSegment>& segments) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  for (const auto& s : segments) out << s.begin << '\t' << s.end << '\t' << s.symbol << '\n';
}

std::vector<content::SymbolSegment> load_labels(const std::filesystem::path& path) {
  std::vector<content::SymbolSegment> segs;
  for (const auto& line : read_lines(path)) {
    const auto f = split_tabs(line);
    const std::string where = path.string();
    if (f.size() != 3) throw InputError(where + ": expected 'begin<TAB>end<TAB>symbol'");
    content::SymbolSegment s{to_index(f[2], where), to_index(f[0], where), to_index(f[1], where)};
    const std::size_t expected_begin = segs.empty() ? 0 : segs.back().end;
    if (s.begin != expected_begin || s.end <= s.begin) throw InputError(where + ": segments must be contiguous");
    segs.push_back(s);
  }
  if (segs.empty()) throw InputError(path.string() + ": no segments");
  return segs;
}

std::filesystem::path labels_path_for(const std::filesystem::path& wav) {
  auto p = wav;
  p.replace_extension(".lab");
  return p;
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "speakers.tsv");
    if (!out) throw InputError("cannot write " + (dir / "speakers.tsv").string());
    out << "speaker\tf0\ttilt\tresonance_hz\tresonance_gain\tvibrato_hz\tvibrato_depth\n";
    for (std::size_t i = 0; i < corpus.speakers.size(); ++i) {
      const auto& v = corpus.speakers[i];
      out << i << '\t' << fmt(v.f0) << '\t' << fmt(v.tilt) << '\t' << fmt(v.resonance_hz) << '\t'
          << fmt(v.resonance_gain) << '\t' << fmt(v.vibrato_hz) << '\t' << fmt(v.vibrato_depth) << '\n';
    }
  }
  std::ofstream index(dir / "corpus.tsv");
  if (!index) throw InputError("cannot write " + (dir / "corpus.tsv").string());
  index << "id\tspeaker\n";
  for (const auto& u : corpus.utterances) {
    index << u.id << '\t' << u.speaker << '\n';
    dsp::save_wav(dir / (u.id + ".wav"), u.audio);
    save_labels(dir / (u.id + ".lab"), u.segments);
  }
}

Corpus load_corpus(const std::filesystem::path& dir) {
  Corpus c;
  const auto speaker_lines = read_lines(dir / "speakers.tsv");
  for (std::size_t i = 1; i < speaker_lines.size(); ++i) {
    const auto f = split_tabs(speaker_lines[i]);
    const std::string where = (dir / "speakers.tsv").string();
    if (f.size() != 7 || to_index(f[0], where) != i - 1) throw InputError(where + ": malformed line " + std::to_string(i + 1));
    c.speakers.push_back({to_double(f[1], where), to_double(f[2], where), to_double(f[3], where),
                          to_double(f[4], where), to_double(f[5], where), to_double(f[6], where)});
  }
  const auto lines = read_lines(dir / "corpus.tsv");
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto f = split_tabs(lines[i]);
    const std::string where = (dir / "corpus.tsv").string();
    if (f.size() != 2) throw InputError(where + ": malformed line " + std::to_string(i + 1));
    Utterance u;
    u.id = f[0];
    u.speaker = to_index(f[1], where);
    if (u.speaker >= c.speakers.size()) throw InputError(where + ": unknown speaker on line " + std::to_string(i + 1));
    u.audio = dsp::load_wav(dir / (u.id + ".wav"));
    u.segments = load_labels(dir / (u.id + ".lab"));
    if (u.segments.back().end != u.audio.samples.size()) {
      throw InputError(u.id + ": labels cover " + std::to_string(u.segments.back().end) + " samples, audio has " +
                       std::to_string(u.audio.samples.size()));
    }
    c.utterances.push_back(std::move(u));
  }
  if (c.utterances.empty()) throw InputError(dir.string() + ": corpus has no utterances");
  return c;
}

}  // namespace flowvc::pipeline
