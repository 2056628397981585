// Command-line front end: synth-corpus, train, convert, eval.
//
// Exit codes: 0 success, 1 runtime failure, 2 bad arguments, 3 invalid
// input file, 4 invalid checkpoint.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "flowvc/errors.hpp"
#include "flowvc/pipeline/checkpoint.hpp"
#include "flowvc/pipeline/config.hpp"
#include "flowvc/pipeline/corpus.hpp"
#include "flowvc/pipeline/inference.hpp"
#include "flowvc/pipeline/train.hpp"

namespace fs = std::filesystem;
using namespace flowvc;
using namespace flowvc::pipeline;

namespace {

enum Exit { kOk = 0, kFailure = 1, kBadArgs = 2, kBadInput = 3, kBadCheckpoint = 4 };

struct SynthArgs {
  std::string out;
  std::size_t speakers = 4;
  std::size_t utts = 10;
  std::uint64_t seed = 1;
};

struct TrainArgs {
  std::string config;
  std::string corpus;
  std::string out;
  std::optional<std::size_t> steps;
  std::string resume;
  std::string log;
};

struct ConvertArgs {
  std::string ckpt;
  std::string source;
  std::string ref;
  std::string out;
  std::optional<std::size_t> steps;
  std::optional<double> cfg;
  std::uint64_t seed = 0;
  std::optional<double> ref_min;
  std::optional<double> ref_max;
};

struct EvalArgs {
  std::string ckpt;
  std::string corpus;
  std::string report;
  std::uint64_t seed = 0;
  std::size_t sources = 1;
};

int synth(const SynthArgs& a) {
  if (a.speakers < 2) throw CLI::ValidationError("--speakers", "at least 2 speakers are required");
  const Corpus c = synth_corpus(SynthConfig{}, a.speakers, a.utts, a.seed);
  save_corpus(c, a.out);
  std::printf("wrote %zu utterances from %zu speakers to %s\n", c.utterances.size(), c.speakers.size(),
              a.out.c_str());
  return kOk;
}

int train(const TrainArgs& a) {
  RunConfig cfg = RunConfig::load(a.config);
  const Corpus corpus = load_corpus(a.corpus);
  std::optional<TrainingSession> session;
  if (a.resume.empty()) {
    session.emplace(cfg, corpus);
  } else {
    session.emplace(Checkpoint::load(a.resume), corpus);
    cfg = session->model().config();
  }
  const std::uint64_t target = a.steps.value_or(cfg.optim.steps);
  const fs::path log_path = !a.log.empty() ? fs::path(a.log)
                            : !cfg.paths.log.empty() ? fs::path(cfg.paths.log)
                                                     : fs::path(a.out + ".log");
  std::ofstream log(log_path, a.resume.empty() ? std::ios::trunc : std::ios::app);
  if (!log) throw InputError("cannot open loss log " + log_path.string());

  const auto stats =
      session->run(target, &log, [&a](const Checkpoint& c) { c.save(a.out); });
  session->checkpoint().save(a.out);
  if (!stats.empty()) {
    std::printf("trained to step %llu, last L_total %.6g (L_cfm %.6g, L_vq %.6g)\n",
                static_cast<unsigned long long>(stats.back().step), stats.back().total, stats.back().cfm,
                stats.back().vq);
  } else {
    std::printf("checkpoint already at step %llu\n", static_cast<unsigned long long>(session->steps_done()));
  }
  std::printf("checkpoint %s, loss log %s\n", a.out.c_str(), log_path.string().c_str());
  return kOk;
}

int convert_cmd(const ConvertArgs& a) {
  const Model model = Model::from_checkpoint(Checkpoint::load(a.ckpt));
  const auto source = dsp::load_wav(a.source);
  const auto labels_path = labels_path_for(a.source);
  if (!fs::exists(labels_path)) {
    throw InputError("source alignment " + labels_path.string() + " not found (the content provider needs it)");
  }
  const auto labels = load_labels(labels_path);
  const auto ref = dsp::load_wav(a.ref);
  ConvertOptions opts;
  opts.steps = a.steps;
  opts.guidance = a.cfg;
  opts.seed = a.seed;
  opts.ref_min_seconds = a.ref_min;
  opts.ref_max_seconds = a.ref_max;
  const Conversion c = convert(model, source, labels, ref, opts);
  dsp::save_wav(a.out, dsp::limit_peak(c.audio));
  const double dur = source.duration();
  std::printf("wrote %s (%zu frames); rtf mel %.4f, rtf vocoder %.4f\n", a.out.c_str(), c.mel.num_frames(),
              c.mel_seconds / dur, c.vocoder_seconds / dur);
  return kOk;
}

int eval_cmd(const EvalArgs& a) {
  const Model model = Model::from_checkpoint(Checkpoint::load(a.ckpt));
  const Corpus corpus = load_corpus(a.corpus);
  EvalOptions opts;
  opts.sources_per_speaker = a.sources;
  opts.convert.seed = a.seed;
  const EvalReport r = evaluate(model, corpus, opts);
  std::ofstream out(a.report);
  if (!out) throw InputError("cannot write report " + a.report);
  out << r.to_tsv();
  std::cout << r.to_tsv();
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Zero-shot voice conversion with flow matching"};
  app.require_subcommand(1);

  SynthArgs sa;
  auto* synth_cmd = app.add_subcommand("synth-corpus", "Render a synthetic multi-speaker corpus");
  synth_cmd->add_option("--out", sa.out, "Output directory")->required();
  synth_cmd->add_option("--speakers", sa.speakers, "Number of speakers (>= 2)")->required();
  synth_cmd->add_option("--utts", sa.utts, "Utterances per speaker")->required()->check(CLI::PositiveNumber);
  synth_cmd->add_option("--seed", sa.seed, "Random seed")->required();

  TrainArgs ta;
  auto* train_cmd = app.add_subcommand("train", "Train a model on a corpus");
  train_cmd->add_option("--config", ta.config, "Run configuration (key = value)")->required();
  train_cmd->add_option("--corpus", ta.corpus, "Corpus directory")->required();
  train_cmd->add_option("--out", ta.out, "Checkpoint to write")->required();
  train_cmd->add_option("--steps", ta.steps, "Total optimizer steps (default optim.steps)");
  train_cmd->add_option("--resume", ta.resume, "Continue from this checkpoint");
  train_cmd->add_option("--log", ta.log, "Loss log path (default <out>.log)");

  ConvertArgs ca;
  auto* convert_sub = app.add_subcommand("convert", "Convert a source utterance to a reference voice");
  convert_sub->add_option("--ckpt", ca.ckpt, "Checkpoint")->required();
  convert_sub->add_option("--source", ca.source, "Source WAV (alignment read from the .lab beside it)")->required();
  convert_sub->add_option("--ref", ca.ref, "Reference WAV of the target voice")->required();
  convert_sub->add_option("--out", ca.out, "Output WAV")->required();
  convert_sub->add_option("--steps", ca.steps, "Euler steps (default cfm.steps)");
  convert_sub->add_option("--cfg", ca.cfg, "Guidance strength (default cfm.guidance)");
  convert_sub->add_option("--seed", ca.seed, "Sampling seed");
  convert_sub->add_option("--ref-min", ca.ref_min, "Minimum reference segment, seconds");
  convert_sub->add_option("--ref-max", ca.ref_max, "Maximum reference segment, seconds");

  EvalArgs ea;
  auto* eval_sub = app.add_subcommand("eval", "Objective metrics over corpus conversions");
  eval_sub->add_option("--ckpt", ea.ckpt, "Checkpoint")->required();
  eval_sub->add_option("--corpus", ea.corpus, "Corpus directory")->required();
  eval_sub->add_option("--report", ea.report, "Report file (TSV)")->required();
  eval_sub->add_option("--seed", ea.seed, "Sampling seed");
  eval_sub->add_option("--sources", ea.sources, "Source utterances per speaker")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kBadArgs;
  }

  try {
    if (*synth_cmd) return synth(sa);
    if (*train_cmd) return train(ta);
    if (*convert_sub) return convert_cmd(ca);
    if (*eval_sub) return eval_cmd(ea);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kBadArgs;
  } catch (const CheckpointError& e) {
    std::cerr << "invalid checkpoint: " << e.what() << '\n';
    return kBadCheckpoint;
  } catch (const InputError& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return kBadInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kBadArgs;
}
