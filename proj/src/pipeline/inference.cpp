#include "flowvc/pipeline/inference.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>

#include "flowvc/dsp/griffin_lim.hpp"
#include "flowvc/dsp/pitch.hpp"
#include "flowvc/errors.hpp"
#include "flowvc/numerics/ops.hpp"

namespace flowvc::pipeline {

namespace {

constexpr std::size_t kCepstra = 19;
constexpr double kF0Low = 60.0;
constexpr double kF0High = 400.0;

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// c_1 .. c_K of the orthonormal DCT-II, per frame.
std::vector<double> cepstra(const dsp::MelSpectrogram& m) {
  const std::size_t bands = m.num_mels(), frames = m.num_frames();
  std::vector<double> basis(kCepstra * bands);
  for (std::size_t k = 0; k < kCepstra; ++k) {
    for (std::size_t b = 0; b < bands; ++b) {
      basis[k * bands + b] = std::sqrt(2.0 / static_cast<double>(bands)) *
                             std::cos(std::numbers::pi * static_cast<double>(k + 1) * (static_cast<double>(b) + 0.5) /
                                      static_cast<double>(bands));
    }
  }
  const auto x = m.frames.data();
  std::vector<double> out(frames * kCepstra, 0.0);
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t k = 0; k < kCepstra; ++k) {
      double s = 0.0;
      for (std::size_t b = 0; b < bands; ++b) s += basis[k * bands + b] * x[t * bands + b];
      out[t * kCepstra + k] = s;
    }
  }
  return out;
}

double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

Conversion convert(const Model& model, const dsp::Waveform& source,
                   const std::vector<content::SymbolSegment>& source_labels, const dsp::Waveform& reference,
                   const ConvertOptions& opts) {
  const RunConfig& cfg = model.config();
  if (source_labels.empty() || source_labels.back().end != source.samples.size()) {
    throw InputError("source labels must cover the source audio exactly");
  }
  cfm::SamplerConfig sampler{opts.steps.value_or(cfg.cfm.steps), opts.guidance.value_or(cfg.cfm.guidance)};
  sampler.validate();
  const timbre::ReferenceConfig ref_cfg{opts.ref_min_seconds.value_or(cfg.train.ref_min_seconds),
                                        opts.ref_max_seconds.value_or(cfg.train.ref_max_seconds)};
  if (reference.sample_rate != cfg.mel.sample_rate) throw InputError("reference sample rate does not match the model");

  num::NoGradGuard no_grad;
  Conversion out;
  const auto t0 = std::chrono::steady_clock::now();
  const auto source_mel = model.analyze(source);
  auto ref_rng = num::make_rng(opts.seed, {0x7ef});
  auto noise_rng = num::make_rng(opts.seed, {0x501});
  auto timbre_seq = timbre::build_reference_timbre(reference, ref_rng(), model.embedder(), ref_cfg, model.mel_norm());
  const auto c = model.condition(source_mel, source_labels, source.samples.size(), std::move(timbre_seq));
  const auto x = cfm::euler_sample(c.condition, model.field(), sampler, noise_rng,
                                   {cfg.mel.n_mels, source_mel.num_frames()});
  out.mel = model.mel_norm().invert(from_channels(x, cfg.mel));
  out.mel_seconds = seconds_since(t0);

  if (opts.render_audio) {
    const auto t1 = std::chrono::steady_clock::now();
    out.audio = dsp::griffin_lim(out.mel, cfg.train.vocoder_iters, opts.seed).waveform;
    // Pad to the source length so analysis yields the same frame count.
    out.audio.samples.resize(std::max(out.audio.samples.size(), source.samples.size()), 0.0);
    out.vocoder_seconds = seconds_since(t1);
  }
  return out;
}

ContentOracle::ContentOracle(const Corpus& corpus, const dsp::MelConfig& mel) : mel_(mel), dims_(kCepstra) {
  for (const auto& u : corpus.utterances) {
    const auto m = dsp::mel_spectrogram(u.audio, mel_);
    const auto c = cepstra(m);
    bank_.insert(bank_.end(), c.begin(), c.end());
    const auto labels = content::frame_symbols(u.segments, m.num_frames(), mel_.hop_length, mel_.win_length);
    labels_.insert(labels_.end(), labels.begin(), labels.end());
  }
  if (labels_.empty()) throw InputError("content oracle needs a non-empty corpus");
}

std::vector<std::size_t> ContentOracle::classify(const dsp::MelSpectrogram& m) const {
  const auto c = cepstra(m);
  const std::size_t n = labels_.size();
  std::vector<std::size_t> out(m.num_frames());
  for (std::size_t t = 0; t < out.size(); ++t) {
    const double* q = &c[t * dims_];
    double best = std::numeric_limits<double>::infinity();
    std::size_t arg = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double* e = &bank_[i * dims_];
      double d = 0.0;
      for (std::size_t k = 0; k < dims_ && d < best; ++k) d += (q[k] - e[k]) * (q[k] - e[k]);
      if (d < best) {
        best = d;
        arg = i;
      }
    }
    out[t] = labels_[arg];
  }
  return out;
}

double ContentOracle::accuracy(const dsp::Waveform& audio, const std::vector<content::SymbolSegment>& labels) const {
  const auto m = dsp::mel_spectrogram(audio, mel_);
  if (m.num_frames() == 0) throw InputError("content accuracy: audio shorter than one window");
  const auto truth = content::frame_symbols(labels, m.num_frames(), mel_.hop_length, mel_.win_length);
  const auto guess = classify(m);
  std::size_t hit = 0;
  for (std::size_t t = 0; t < truth.size(); ++t) hit += truth[t] == guess[t] ? 1 : 0;
  return static_cast<double>(hit) / static_cast<double>(truth.size());
}

std::string EvalReport::to_tsv() const {
  const auto line = [](const char* key, double v) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "%s\t%.9g\n", key, v);
    return std::string(buf);
  };
  return "n_items\t" + std::to_string(n_items) + "\n" + line("secs_proxy", secs_proxy) +
         line("secs_to_source", secs_to_source) + line("mel_l2", mel_l2) + line("f0_ratio", f0_ratio) +
         line("content_acc", content_acc) + line("rtf_mel", rtf_mel) + line("rtf_vocoder", rtf_vocoder);
}

EvalReport score(const std::vector<ScoredItem>& items, const timbre::SpeakerEmbedder& embedder,
                 const ContentOracle& oracle) {
  if (items.empty()) throw InputError("evaluation set is empty");
  EvalReport r;
  r.n_items = items.size();
  std::vector<double> ratios;
  double l2_sum = 0.0, hits = 0.0;
  std::size_t l2_frames = 0, frames = 0;
  for (const auto& it : items) {
    const auto conv = embedder.embed(it.converted);
    r.secs_proxy += timbre::cosine_similarity(conv, embedder.embed(it.target_reference));
    r.secs_to_source += timbre::cosine_similarity(conv, embedder.embed(it.source));

    const double f_conv = dsp::estimate_f0(it.converted, kF0Low, kF0High);
    const double f_target = dsp::estimate_f0(it.target_reference, kF0Low, kF0High);
    if (f_target > 0.0) ratios.push_back(f_conv / f_target);

    const std::size_t t = dsp::mel_spectrogram(it.converted, embedder.mel_config()).num_frames();
    hits += oracle.accuracy(it.converted, it.source_labels) * static_cast<double>(t);
    frames += t;

    if (it.predicted_mel && it.ground_truth_mel) {
      const auto& p = *it.predicted_mel;
      const auto& g = *it.ground_truth_mel;
      if (p.frames.shape() != g.frames.shape()) throw InputError("mel_l2: predicted and ground-truth shapes differ");
      const auto a = p.frames.data(), b = g.frames.data();
      for (std::size_t f = 0; f < p.num_frames(); ++f) {
        double s = 0.0;
        for (std::size_t k = 0; k < p.num_mels(); ++k) {
          const double d = a[f * p.num_mels() + k] - b[f * p.num_mels() + k];
          s += d * d;
        }
        l2_sum += std::sqrt(s);
      }
      l2_frames += p.num_frames();
    }
  }
  const auto n = static_cast<double>(items.size());
  r.secs_proxy /= n;
  r.secs_to_source /= n;
  r.f0_ratio = median(ratios);
  r.content_acc = hits / static_cast<double>(frames);
  r.mel_l2 = l2_frames > 0 ? l2_sum / static_cast<double>(l2_frames) : std::numeric_limits<double>::quiet_NaN();
  return r;
}

EvalReport evaluate(const Model& model, const Corpus& corpus, const EvalOptions& opts) {
  const std::size_t n_spk = corpus.speakers.size();
  std::vector<std::vector<std::size_t>> utts(n_spk);
  for (std::size_t s = 0; s < n_spk; ++s) {
    utts[s] = corpus.utterances_of(s);
    if (utts[s].size() < 2) throw InputError("evaluation needs at least two utterances per speaker");
  }
  std::vector<ScoredItem> items;
  double mel_time = 0.0, voc_time = 0.0, duration = 0.0;
  std::uint64_t index = 0;
  const auto run = [&](std::size_t src, std::size_t ref, bool reconstruction) {
    const auto& s = corpus.utterances[src];
    const auto& r = corpus.utterances[ref];
    ConvertOptions o = opts.convert;
    o.seed = opts.convert.seed + index++;
    auto c = convert(model, s.audio, s.segments, r.audio, o);
    mel_time += c.mel_seconds;
    voc_time += c.vocoder_seconds;
    duration += s.audio.duration();
    ScoredItem item{std::move(c.audio), s.audio, s.segments, r.audio, std::nullopt, std::nullopt};
    if (reconstruction) {
      item.ground_truth_mel = dsp::mel_spectrogram(s.audio, model.config().mel);
      item.predicted_mel = std::move(c.mel);
    }
    items.push_back(std::move(item));
  };
  for (std::size_t s = 0; s < n_spk; ++s) {
    for (std::size_t i = 0; i < std::min(opts.sources_per_speaker, utts[s].size()); ++i) {
      for (std::size_t t = 0; t < n_spk; ++t) {
        if (t != s) run(utts[s][i], utts[t][(i + 1) % utts[t].size()], false);
      }
    }
  }
  std::vector<ScoredItem> cross = std::move(items);
  items.clear();
  for (std::size_t s = 0; s < n_spk; ++s) {
    for (std::size_t i = 0; i < std::min(opts.reconstructions_per_speaker, utts[s].size()); ++i) {
      run(utts[s][i], utts[s][(i + 1) % utts[s].size()], true);
    }
  }
  const ContentOracle oracle(corpus, model.config().mel);
  // Timbre metrics come from cross-speaker items; mel_l2 from reconstructions.
  EvalReport report = score(cross.empty() ? items : cross, model.embedder(), oracle);
  if (!items.empty()) report.mel_l2 = score(items, model.embedder(), oracle).mel_l2;
  report.rtf_mel = duration > 0.0 ? mel_time / duration : 0.0;
  report.rtf_vocoder = duration > 0.0 ? voc_time / duration : 0.0;
  return report;
}

}  // namespace flowvc::pipeline
