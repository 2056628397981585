#include <bit>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "doctest.h"
#include "flowvc/dsp/pitch.hpp"
#include "flowvc/errors.hpp"
#include "flowvc/numerics/ops.hpp"
#include "flowvc/pipeline/checkpoint.hpp"
#include "flowvc/pipeline/config.hpp"
#include "flowvc/pipeline/corpus.hpp"
#include "flowvc/pipeline/inference.hpp"
#include "flowvc/pipeline/model.hpp"
#include "flowvc/pipeline/train.hpp"
#include "support/gradcheck.hpp"

using namespace flowvc;
using namespace flowvc::pipeline;
using num::Tensor;

namespace {

RunConfig tiny_config() {
  RunConfig c;
  auto& d = c.dims;
  d.ssl_hidden = 8;
  d.ssl_dim = 8;
  d.speaker_dim = 16;
  d.fusion_hidden = 8;
  d.memory_hidden = 8;
  d.memory_heads = 2;
  d.memory_blocks = 1;
  d.memory_groups = 2;
  d.context_dim = 8;
  d.context_heads = 2;
  d.context_blocks = 1;
  d.context_ffn = 16;
  d.unet_hidden = 8;
  d.unet_levels = 2;
  d.unet_res_blocks = 1;
  d.unet_time_dim = 8;
  d.unet_groups = 2;
  c.rvq.size = 16;
  c.optim.batch_size = 2;
  c.optim.lr = 3e-3;
  c.train.vocoder_iters = 8;
  return c;
}

SynthConfig short_utterances() {
  SynthConfig s;
  s.min_utt_seconds = 2.2;
  s.max_utt_seconds = 2.5;
  return s;
}

const Corpus& small_corpus() {
  static const Corpus corpus = synth_corpus(short_utterances(), 2, 3, 11);
  return corpus;
}

std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("flowvc_pipeline_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::string read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

bool same_bits(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::bit_cast<std::uint64_t>(a[i]) != std::bit_cast<std::uint64_t>(b[i])) return false;
  }
  return true;
}

std::vector<double> mean_per_window(const std::vector<StepStats>& s, std::size_t begin, std::size_t end) {
  double sum = 0.0;
  for (std::size_t i = begin; i < end; ++i) sum += s[i].cfm;
  return {sum / static_cast<double>(end - begin)};
}

}  // namespace

TEST_CASE("config defaults carry the published hyper-parameters") {
  const RunConfig c;
  CHECK(c.rvq.weight == 0.01);
  CHECK(c.rvq.stages == 1);
  CHECK(c.cfm.sigma_min == 1e-4);
  CHECK(c.cfm.steps == 10);
  CHECK(c.cfm.guidance == 0.7);
  CHECK(c.optim.lr == 1e-4);
  CHECK(c.optim.batch_size == 16);

  const RunConfig p = full_scale_config();
  CHECK(p.rvq.size == 8200);
  CHECK(p.dims.ssl_dim == 1024);
  CHECK(p.dims.context_heads == 8);
  CHECK(p.dims.context_blocks == 6);
  CHECK(p.dims.context_dim == 1024);
  CHECK(p.dims.unet_hidden == 1280);
  CHECK_NOTHROW(p.validate());
}

TEST_CASE("config text round-trips losslessly") {
  RunConfig c = tiny_config();
  c.optim.lr = 0.1 + 0.2;  // not representable in short decimal form
  c.cfm.sigma_min = 1e-4;
  c.seeds.data = 0xfffffffffffffffull;
  c.paths.corpus = "/tmp/some corpus";
  const RunConfig back = RunConfig::from_text(c.to_text());
  CHECK(back == c);
  CHECK(back.to_text() == c.to_text());

  const RunConfig partial = RunConfig::from_text("# comment\n\noptim.lr = 0.002\n  rvq.size=64  \n");
  CHECK(partial.optim.lr == 0.002);
  CHECK(partial.rvq.size == 64);
  CHECK(partial.cfm.steps == 10);
}

TEST_CASE("config rejects malformed text") {
  CHECK_THROWS_AS(RunConfig::from_text("nonsense.key = 1\n"), InputError);
  CHECK_THROWS_AS(RunConfig::from_text("optim.lr 0.1\n"), InputError);
  CHECK_THROWS_AS(RunConfig::from_text("optim.lr = abc\n"), InputError);
  CHECK_THROWS_AS(RunConfig::from_text("rvq.size = -3\n"), InputError);
  CHECK_THROWS_AS(RunConfig::from_text("rvq.weight = -0.5\n"), InputError);
  CHECK_THROWS_AS(RunConfig::from_text("dims.unet_hidden = 0\n"), InputError);
  CHECK_THROWS_AS(RunConfig::from_text("cfm.guidance = nan\n"), InputError);
}

TEST_CASE("checkpoint byte layout") {
  Checkpoint c;
  c.config_text = "a=1\n";
  c.step = 7;
  c.records.push_back({"w", {2}, {1.0, -2.5}});
  const std::string bytes = c.serialize();

  // Expected bytes assembled by hand from the documented layout.
  std::string expected = "FLOWVCKP";
  const auto le = [&expected](std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) expected.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  };
  le(1, 4);
  le(4, 8);
  expected += "a=1\n";
  le(7, 8);
  le(1, 8);
  le(1, 4);
  expected += "w";
  le(1, 4);
  le(2, 8);
  le(0x3ff0000000000000ull, 8);   // 1.0
  le(0xc004000000000000ull, 8);   // -2.5
  CHECK(bytes == expected);

  const Checkpoint back = Checkpoint::deserialize(bytes);
  CHECK(back == c);
  CHECK(back.serialize() == bytes);
}

TEST_CASE("checkpoint rejects bad input") {
  Checkpoint c;
  c.config_text = "x";
  c.records.push_back({"w", {1}, {3.0}});
  const std::string good = c.serialize();

  std::string bad_magic = good;
  bad_magic[0] = 'X';
  CHECK_THROWS_AS(Checkpoint::deserialize(bad_magic), CheckpointError);

  std::string bad_version = good;
  bad_version[8] = 2;
  CHECK_THROWS_WITH_AS(Checkpoint::deserialize(bad_version), doctest::Contains("version"), CheckpointError);

  CHECK_THROWS_AS(Checkpoint::deserialize(good.substr(0, good.size() - 3)), CheckpointError);
  CHECK_THROWS_AS(Checkpoint::deserialize(good + "z"), CheckpointError);
  CHECK_THROWS_AS(Checkpoint::load("/nonexistent/ckpt.bin"), CheckpointError);
}

TEST_CASE("default voices and corpus layout") {
  const auto v = default_voices(4);
  REQUIRE(v.size() == 4);
  CHECK(v[0].f0 == 110.0);
  CHECK(v[1].f0 == 150.0);
  CHECK(v[2].f0 == 200.0);
  CHECK(v[3].f0 == 260.0);
  for (std::size_t i = 1; i < v.size(); ++i) {
    CHECK(v[i].f0 > v[i - 1].f0);
    CHECK(v[i].tilt != v[i - 1].tilt);
    CHECK(v[i].resonance_hz != v[i - 1].resonance_hz);
  }
  CHECK_THROWS_AS(default_voices(1), InputError);
  const auto many = default_voices(30);
  for (std::size_t i = 1; i < many.size(); ++i) CHECK(many[i].f0 > many[i - 1].f0);

  const Corpus& c = small_corpus();
  CHECK(c.utterances.size() == 6);
  for (const auto& u : c.utterances) {
    REQUIRE_FALSE(u.segments.empty());
    std::size_t total = 0;
    for (std::size_t i = 0; i < u.segments.size(); ++i) {
      CHECK(u.segments[i].begin == (i == 0 ? 0 : u.segments[i - 1].end));
      CHECK(u.segments[i].symbol < 12);
      total += u.segments[i].end - u.segments[i].begin;
    }
    CHECK(total == u.audio.samples.size());
    CHECK(u.audio.duration() >= 2.2 - 1e-9);
    CHECK(u.audio.duration() <= 2.5 + 1e-9);
  }
}

TEST_CASE("synthesis is a pure function of the seed") {
  const auto a = synth_corpus(short_utterances(), 2, 2, 5);
  const auto b = synth_corpus(short_utterances(), 2, 2, 5);
  const auto other = synth_corpus(short_utterances(), 2, 2, 6);
  REQUIRE(a.utterances.size() == b.utterances.size());
  for (std::size_t i = 0; i < a.utterances.size(); ++i) {
    CHECK(same_bits(a.utterances[i].audio.samples, b.utterances[i].audio.samples));
    CHECK(a.utterances[i].segments.size() == b.utterances[i].segments.size());
  }
  CHECK_FALSE(same_bits(a.utterances[0].audio.samples, other.utterances[0].audio.samples));

  const auto dir_a = scratch_dir("synth_a"), dir_b = scratch_dir("synth_b");
  save_corpus(a, dir_a);
  save_corpus(b, dir_b);
  for (const auto& entry : std::filesystem::directory_iterator(dir_a)) {
    CHECK(read_bytes(entry.path()) == read_bytes(dir_b / entry.path().filename()));
  }
}

TEST_CASE("rendered voices carry their base pitch") {
  VoiceProfile low, high;
  low.f0 = 120.0;
  high.f0 = 220.0;
  high.tilt = 1.3;
  high.resonance_hz = 3800.0;
  const auto c = synth_corpus(SynthConfig{}, {low, high}, 2, 3);
  for (const auto& u : c.utterances) {
    const double base = c.speakers[u.speaker].f0;
    const double f0 = dsp::estimate_f0(u.audio, 60.0, 400.0);
    CHECK(std::abs(f0 / base - 1.0) <= 0.05);
  }
}

TEST_CASE("corpus directory round-trip and validation") {
  const Corpus& c = small_corpus();
  const auto dir = scratch_dir("roundtrip");
  save_corpus(c, dir);
  const Corpus back = load_corpus(dir);
  REQUIRE(back.utterances.size() == c.utterances.size());
  CHECK(back.speakers == c.speakers);
  for (std::size_t i = 0; i < c.utterances.size(); ++i) {
    CHECK(back.utterances[i].id == c.utterances[i].id);
    CHECK(back.utterances[i].speaker == c.utterances[i].speaker);
    CHECK(same_bits(back.utterances[i].audio.samples, c.utterances[i].audio.samples));
    CHECK(back.utterances[i].segments.size() == c.utterances[i].segments.size());
  }

  {
    std::ofstream bad(dir / (c.utterances[0].id + ".lab"));
    bad << "0\t100\t3\n200\t300\t4\n";
  }
  CHECK_THROWS_AS(load_corpus(dir), InputError);
  CHECK_THROWS_AS(load_corpus(dir / "missing"), InputError);
}

TEST_CASE("total loss combines the two terms") {
  const Tensor one = Tensor::scalar(1.0), two = Tensor::scalar(2.0);
  CHECK(combine_losses(one, two, 0.01).total.item() == doctest::Approx(1.02).epsilon(1e-15));
  CHECK(combine_losses(one, two, 0.0).total.item() == 1.0);

  RunConfig cfg = tiny_config();
  cfg.cfm.drop_prob = 0.0;
  TrainingSession session(cfg, small_corpus());
  const auto batch = session.batch_for(0);
  auto rng = num::make_rng(21);
  const auto loss = total_loss(batch, session.model(), rng);
  CHECK(std::abs(loss.terms.total.item() - (loss.terms.cfm.item() + 0.01 * loss.terms.vq.item())) <= 1e-12);
  CHECK(loss.terms.vq.item() > 0.0);

  RunConfig zero = cfg;
  zero.rvq.weight = 0.0;
  TrainingSession zero_session(zero, small_corpus());
  auto rng0 = num::make_rng(21);
  const auto l0 = total_loss(zero_session.batch_for(0), zero_session.model(), rng0);
  CHECK(l0.terms.total.item() == l0.terms.cfm.item());
}

TEST_CASE("total loss gradient w.r.t. the fusion module") {
  RunConfig cfg = tiny_config();
  cfg.cfm.drop_prob = 0.0;
  TrainingSession session(cfg, small_corpus());
  Model& model = session.model();
  const auto batch = session.batch_for(3);
  const auto run = [&] {
    auto rng = num::make_rng(33);
    return total_loss(batch, model, rng).terms;
  };

  std::vector<std::pair<std::string, Tensor>> params;
  model.fusion().visit_parameters("fusion", [&params](const std::string& n, Tensor& p) { params.emplace_back(n, p); });

  // Component gradients, separately.
  std::vector<std::vector<double>> g_cfm, g_vq, g_total;
  for (auto* which : {&g_cfm, &g_vq, &g_total}) {
    for (auto& [n, p] : params) p.zero_grad();
    const auto t = run();
    num::backward(which == &g_cfm ? t.cfm : which == &g_vq ? t.vq : t.total);
    for (auto& [n, p] : params) which->push_back(p.grad());
  }
  double norm = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    for (std::size_t j = 0; j < g_total[i].size(); ++j) {
      CHECK(g_total[i][j] == doctest::Approx(g_cfm[i][j] + 0.01 * g_vq[i][j]).epsilon(1e-12));
      norm += g_total[i][j] * g_total[i][j];
    }
  }
  CHECK(norm > 0.0);

  testing::GradCheckOptions opt;
  opt.max_per_param = 6;
  // The loss sums thousands of terms, so roundoff error ~1/h dominates at small steps.
  opt.step = 1e-3;
  const auto r = testing::check_gradients([&] { return run().total; }, params, opt);
  INFO(r.worst);
  CHECK(r.max_rel_error < 1e-6);
}

TEST_CASE("training rejects corpora that are too small") {
  const Corpus& c = small_corpus();
  Corpus one_each;
  one_each.speakers = c.speakers;
  for (std::size_t s = 0; s < c.speakers.size(); ++s) one_each.utterances.push_back(c.utterances[c.utterances_of(s)[0]]);
  CHECK_THROWS_WITH_AS(TrainingSession(tiny_config(), one_each), doctest::Contains("too small"), InputError);

  RunConfig long_crop = tiny_config();
  long_crop.train.crop_seconds = 10.0;
  CHECK_THROWS_AS(TrainingSession(long_crop, c), InputError);
}

TEST_CASE("non-finite loss aborts training") {
  TrainingSession session(tiny_config(), small_corpus());
  session.step();
  Tensor w = session.model().fusion().first.weight;
  w.mutable_data()[0] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(session.step(), TrainingError);
}

TEST_CASE("log line format") {
  StepStats s{12, 1.5, 1.25, 25.0, 0.0};
  CHECK(format_log_line(s) == "12\t1.5\t1.25\t25");
}

TEST_CASE("resuming reproduces the next step exactly") {
  const Corpus& corpus = small_corpus();
  TrainingSession a(tiny_config(), corpus);
  a.run(2);
  const Checkpoint mid = a.checkpoint();
  const auto next = a.step();

  TrainingSession b(Checkpoint::deserialize(mid.serialize()), corpus);
  CHECK(b.steps_done() == 2);
  const auto resumed = b.step();
  CHECK(resumed.step == next.step);
  CHECK(std::bit_cast<std::uint64_t>(resumed.total) == std::bit_cast<std::uint64_t>(next.total));
  CHECK(std::bit_cast<std::uint64_t>(resumed.cfm) == std::bit_cast<std::uint64_t>(next.cfm));
  CHECK(a.checkpoint().serialize() == b.checkpoint().serialize());
}

TEST_CASE("training run: loss decreases, frozen parts untouched, persistence exact") {
  const Corpus& corpus = small_corpus();
  TrainingSession session(tiny_config(), corpus);
  const auto ssl_before = session.model().ssl().weights();
  std::vector<std::vector<double>> frozen_before;
  for (const auto& w : ssl_before) frozen_before.push_back(w.to_vector());
  frozen_before.push_back(session.model().embedder().projection().to_vector());

  std::ostringstream log;
  std::size_t checkpoints = 0;
  const auto stats = session.run(500, &log, [&checkpoints](const Checkpoint&) { ++checkpoints; });
  REQUIRE(stats.size() == 500);
  CHECK(checkpoints == 0);

  // Smoothed (100-step mean) CFM loss is lower at the end than at the start.
  const double first = mean_per_window(stats, 0, 100)[0];
  const double last = mean_per_window(stats, 400, 500)[0];
  MESSAGE("L_cfm first-100 mean " << first << ", last-100 mean " << last);
  CHECK(last < first);

  std::size_t lines = 0;
  std::istringstream in(log.str());
  for (std::string line; std::getline(in, line); ++lines) {
    CHECK(std::count(line.begin(), line.end(), '\t') == 3);
  }
  CHECK(lines == 500);

  const auto ssl_after = session.model().ssl().weights();
  for (std::size_t i = 0; i < ssl_after.size(); ++i) CHECK(same_bits(ssl_after[i].to_vector(), frozen_before[i]));
  CHECK(same_bits(session.model().embedder().projection().to_vector(), frozen_before.back()));
  bool fusion_moved = false;
  for (const auto& s : stats) fusion_moved = fusion_moved || s.fusion_grad_norm > 0.0;
  CHECK(fusion_moved);

  // Checkpoint persistence.
  const auto dir = scratch_dir("ckpt");
  const Checkpoint ckpt = session.checkpoint();
  ckpt.save(dir / "a.ckpt");
  Checkpoint::load(dir / "a.ckpt").save(dir / "b.ckpt");
  CHECK(read_bytes(dir / "a.ckpt") == read_bytes(dir / "b.ckpt"));

  const Model loaded = Model::from_checkpoint(Checkpoint::load(dir / "a.ckpt"));
  const auto& src = corpus.utterances[0];
  const auto& same_spk_ref = corpus.utterances[1];
  const auto& other_ref = corpus.utterances[corpus.utterances_of(1)[0]];
  ConvertOptions opts;
  opts.seed = 5;
  const auto mem = convert(session.model(), src.audio, src.segments, same_spk_ref.audio, opts);
  const auto disk = convert(loaded, src.audio, src.segments, same_spk_ref.audio, opts);
  const auto again = convert(session.model(), src.audio, src.segments, same_spk_ref.audio, opts);
  CHECK(same_bits(mem.mel.frames.to_vector(), disk.mel.frames.to_vector()));
  CHECK(same_bits(mem.audio.samples, disk.audio.samples));
  CHECK(same_bits(mem.audio.samples, again.audio.samples));

  const auto src_mel = dsp::mel_spectrogram(src.audio, loaded.config().mel);
  CHECK(mem.mel.num_frames() == src_mel.num_frames());
  CHECK(dsp::mel_spectrogram(mem.audio, loaded.config().mel).num_frames() == src_mel.num_frames());

  // Conversion towards the source utterance itself lands nearer the source
  // mel than conversion towards the other speaker.
  const auto mel_l2 = [&](const Conversion& c) {
    const auto a = c.mel.frames.data(), b = src_mel.frames.data();
    double sum = 0.0;
    for (std::size_t t = 0; t < src_mel.num_frames(); ++t) {
      double s = 0.0;
      for (std::size_t k = 0; k < src_mel.num_mels(); ++k) {
        const double d = a[t * src_mel.num_mels() + k] - b[t * src_mel.num_mels() + k];
        s += d * d;
      }
      sum += std::sqrt(s);
    }
    return sum / static_cast<double>(src_mel.num_frames());
  };
  const double self_l2 = mel_l2(convert(session.model(), src.audio, src.segments, src.audio, opts));
  const double cross_l2 = mel_l2(convert(session.model(), src.audio, src.segments, other_ref.audio, opts));
  MESSAGE("mel_l2 self " << self_l2 << ", cross-speaker " << cross_l2);
  CHECK(self_l2 < cross_l2);

  // Evaluation report on the trained model.
  EvalOptions eo;
  eo.convert.seed = 9;
  const EvalReport report = evaluate(loaded, corpus, eo);
  CHECK(report.n_items == 2);
  CHECK(report.rtf_mel > 0.0);
  CHECK(report.rtf_vocoder > 0.0);
  CHECK(report.secs_proxy >= -1.0);
  CHECK(report.secs_proxy <= 1.0);
  CHECK(report.content_acc >= 0.0);
  CHECK(report.content_acc <= 1.0);
  CHECK(std::isfinite(report.mel_l2));
  CHECK(report.to_tsv().find("content_acc\t") != std::string::npos);
}

TEST_CASE("convert validates its inputs") {
  TrainingSession session(tiny_config(), small_corpus());
  const auto& u = small_corpus().utterances[0];
  auto short_labels = u.segments;
  short_labels.back().end -= 1;
  CHECK_THROWS_AS(convert(session.model(), u.audio, short_labels, u.audio), InputError);
  dsp::Waveform tiny_ref{std::vector<double>(8000, 0.0), 16000.0};
  CHECK_THROWS_AS(convert(session.model(), u.audio, u.segments, tiny_ref), InputError);
  ConvertOptions zero_steps;
  zero_steps.steps = 0;
  CHECK_THROWS_AS(convert(session.model(), u.audio, u.segments, u.audio, zero_steps), InputError);
}

TEST_CASE("scoring identities") {
  const Corpus& c = small_corpus();
  const RunConfig cfg = tiny_config();
  const timbre::SpeakerEmbedder embedder(cfg.seeds.speaker, cfg.dims.speaker_dim, cfg.mel);
  const ContentOracle oracle(c, cfg.mel);
  const auto& src = c.utterances[0];
  const auto& target = c.utterances[c.utterances_of(1)[0]];
  const auto& unrelated = c.utterances[1];

  // Converted audio identical to the target reference.
  ScoredItem same{target.audio, src.audio, src.segments, target.audio, std::nullopt, std::nullopt};
  same.source_labels = target.segments;
  const auto r_same = score({same}, embedder, oracle);
  CHECK(std::abs(r_same.secs_proxy - 1.0) <= 1e-6);
  CHECK(r_same.content_acc == 1.0);
  CHECK(r_same.f0_ratio == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::isnan(r_same.mel_l2));

  // Converted audio from an unrelated speaker scores lower.
  ScoredItem other{unrelated.audio, src.audio, unrelated.segments, target.audio, std::nullopt, std::nullopt};
  const auto r_other = score({other}, embedder, oracle);
  CHECK(r_other.secs_proxy < r_same.secs_proxy);

  // Ground-truth source audio is classified perfectly.
  for (const auto& u : c.utterances) CHECK(oracle.accuracy(u.audio, u.segments) == 1.0);

  CHECK_THROWS_AS(score({}, embedder, oracle), InputError);
}
