#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "flowvc/errors.hpp"
#include "flowvc/timbre/attention.hpp"
#include "flowvc/timbre/modules.hpp"
#include "flowvc/timbre/speaker.hpp"
#include "support/gradcheck.hpp"

using namespace flowvc;
using namespace flowvc::timbre;
using num::Tensor;

namespace {

using Mat = std::vector<std::vector<double>>;  // [row][col]

Mat to_mat(const Tensor& t) {
  Mat m(t.rows(), std::vector<double>(t.cols()));
  for (std::size_t i = 0; i < t.rows(); ++i)
    for (std::size_t j = 0; j < t.cols(); ++j) m[i][j] = t.at(i, j);
  return m;
}

// y = W x + b on plain arrays; x is [in x T].
Mat affine(const num::Linear& l, const Mat& x) {
  const auto w = to_mat(l.weight);
  Mat y(w.size(), std::vector<double>(x[0].size()));
  for (std::size_t o = 0; o < w.size(); ++o)
    for (std::size_t t = 0; t < x[0].size(); ++t) {
      double s = l.bias.at(o);
      for (std::size_t i = 0; i < x.size(); ++i) s += w[o][i] * x[i][t];
      y[o][t] = s;
    }
  return y;
}

// Dense multi-head attention evaluated query by query, key by key.
Mat dense_attention(const MultiHeadAttention& mha, const Mat& q_seq, const Mat& kv_seq) {
  const Mat q = affine(mha.query, q_seq), k = affine(mha.key, kv_seq), v = affine(mha.value, kv_seq);
  const std::size_t dim = q.size(), d = dim / mha.heads, tq = q[0].size(), tk = k[0].size();
  Mat concat(dim, std::vector<double>(tq, 0.0));
  for (std::size_t h = 0; h < mha.heads; ++h)
    for (std::size_t i = 0; i < tq; ++i) {
      std::vector<double> e(tk);
      for (std::size_t j = 0; j < tk; ++j) {
        double s = 0;
        for (std::size_t c = h * d; c < (h + 1) * d; ++c) s += q[c][i] * k[c][j];
        e[j] = std::exp(s / std::sqrt(static_cast<double>(d)));
      }
      double z = 0;
      for (double x : e) z += x;
      for (std::size_t c = h * d; c < (h + 1) * d; ++c)
        for (std::size_t j = 0; j < tk; ++j) concat[c][i] += e[j] / z * v[c][j];
    }
  return affine(mha.output, concat);
}

Mat dense_layer_norm(const Mat& x, const num::NormAffine& n) {
  Mat y = x;
  for (std::size_t t = 0; t < x[0].size(); ++t) {
    double mu = 0, var = 0;
    for (std::size_t c = 0; c < x.size(); ++c) mu += x[c][t] / static_cast<double>(x.size());
    for (std::size_t c = 0; c < x.size(); ++c) var += (x[c][t] - mu) * (x[c][t] - mu) / static_cast<double>(x.size());
    for (std::size_t c = 0; c < x.size(); ++c) y[c][t] = (x[c][t] - mu) / std::sqrt(var + 1e-5) * n.gamma.at(c) + n.beta.at(c);
  }
  return y;
}

Mat add(const Mat& a, const Mat& b) {
  Mat y = a;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[0].size(); ++j) y[i][j] += b[i][j];
  return y;
}

Tensor permute_cols(const Tensor& x, const std::vector<std::size_t>& perm) {
  std::vector<Tensor> cols;
  for (std::size_t p : perm) cols.push_back(num::slice_cols(x, p, p + 1));
  return num::transpose(num::concat_rows([&] {
    std::vector<Tensor> rows;
    for (auto& c : cols) rows.push_back(num::transpose(c));
    return rows;
  }()));
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

std::vector<std::pair<std::string, Tensor>> named(auto& module) {
  std::vector<std::pair<std::string, Tensor>> out;
  module.visit_parameters("", [&](const std::string& n, Tensor& p) { out.emplace_back(n, p); });
  return out;
}

dsp::Waveform voice(double f0, double tilt, std::uint64_t seed, double seconds = 3.0) {
  auto rng = num::make_rng(seed);
  dsp::Waveform w;
  w.samples.resize(static_cast<std::size_t>(seconds * 16000));
  // Content varies through a slowly wandering resonance; timbre through f0 and tilt.
  double res = 500 + 1500 * num::uniform01(rng), ph = 0;
  for (std::size_t i = 0; i < w.samples.size(); ++i) {
    if (i % 3200 == 0) res = 500 + 1500 * num::uniform01(rng);
    ph += 2 * M_PI * f0 / 16000.0;
    double s = 0;
    for (int h = 1; h * f0 < 7000; ++h) {
      const double fh = h * f0;
      s += std::pow(h, -tilt) * (1 + 2 * std::exp(-std::pow((fh - res) / 200, 2))) * std::sin(h * ph);
    }
    w.samples[i] = 0.1 * s;
  }
  return w;
}

}  // namespace

TEST_CASE("film_apply identities and hand case") {
  auto rng = num::make_rng(1);
  const auto h = num::normal_tensor({3, 4}, 1.0, rng);
  CHECK(film_apply(h, {Tensor::full({3}, 1.0), Tensor::zeros({3})}).to_vector() == h.to_vector());
  const auto beta = Tensor::vector({0.5, -1, 2});
  const auto c = film_apply(h, {Tensor::zeros({3}), beta});
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t t = 0; t < 4; ++t) CHECK(c.at(i, t) == beta.at(i));
  const auto hand = film_apply(Tensor::vector({3, 3}), {Tensor::vector({2, -1}), Tensor::vector({0, 1})});
  CHECK(hand.to_vector() == std::vector<double>{6, -2});
  CHECK_THROWS_AS(film_apply(h, {Tensor::zeros({2}), Tensor::zeros({2})}), InputError);
}

TEST_CASE("attention: single key, stochastic columns, dense oracle") {
  auto rng = num::make_rng(2);
  const auto mha = MultiHeadAttention::init(8, 2, rng);
  std::vector<Tensor> w;
  const auto q = num::normal_tensor({8, 5}, 1.0, rng);
  const auto kv1 = num::normal_tensor({8, 1}, 1.0, rng);
  const auto out1 = mha(q, kv1, &w);
  REQUIRE(w.size() == 2);
  for (const auto& a : w)
    for (double v : a.data()) CHECK(v == 1.0);
  // Every query receives the same single value vector.
  for (std::size_t t = 1; t < 5; ++t)
    for (std::size_t c = 0; c < 8; ++c) CHECK(out1.at(c, t) == doctest::Approx(out1.at(c, 0)).epsilon(1e-14));

  const auto kv = num::normal_tensor({8, 7}, 2.0, rng);
  mha(q, kv, &w);
  for (const auto& a : w) {
    for (std::size_t i = 0; i < a.cols(); ++i) {
      double s = 0;
      for (std::size_t j = 0; j < a.rows(); ++j) {
        CHECK(a.at(j, i) > 0.0);
        s += a.at(j, i);
      }
      CHECK(std::abs(s - 1.0) <= 1e-12);
    }
  }

  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto r = num::make_rng(seed, {9});
    const auto m = MultiHeadAttention::init(4, 2, r);
    const auto q2 = num::normal_tensor({4, 2}, 0.5, r), k3 = num::normal_tensor({4, 3}, 0.5, r);
    const auto got = to_mat(m(q2, k3));
    const auto want = dense_attention(m, to_mat(q2), to_mat(k3));
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 2; ++j) CHECK(std::abs(got[i][j] - want[i][j]) < 1e-10);
  }
  CHECK_THROWS_AS(MultiHeadAttention::init(6, 4, rng), InputError);
}

TEST_CASE("cross-attention block matches a dense post-norm oracle") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto r = num::make_rng(seed, {10});
    const auto block = CrossAttentionBlock::init(4, 2, 6, r);
    const auto q = num::normal_tensor({4, 2}, 1.0, r), kv = num::normal_tensor({4, 3}, 1.0, r);
    const auto got = to_mat(cross_attention(q, kv, block));
    const Mat qm = to_mat(q);
    const Mat y = dense_layer_norm(add(qm, dense_attention(block.attention, qm, to_mat(kv))), block.norm1);
    Mat hidden = affine(block.ffn_in, y);
    for (auto& row : hidden)
      for (auto& v : row) v = v / (1 + std::exp(-v));
    const Mat want = dense_layer_norm(add(y, affine(block.ffn_out, hidden)), block.norm2);
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 2; ++j) CHECK(std::abs(got[i][j] - want[i][j]) < 1e-10);
  }
}

TEST_CASE("memory_augment: permutation invariance, single frame, gradients") {
  MemoryConfig cfg{10, 8, 2, 2, 4, 6};
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto rng = num::make_rng(seed, {11});
    auto mem = MemoryAugment::init(cfg, rng);
    const TimbreSequence x{num::normal_tensor({10, 5}, 1.0, rng), 6};
    const auto a = memory_augment(x, mem);
    CHECK(a.dim() == 6);
    const TimbreSequence shuffled{permute_cols(x.frames, dsp::shuffle_permutation(5, seed + 1)), 6};
    const auto b = memory_augment(shuffled, mem);
    CHECK(max_abs_diff(a.gamma, b.gamma) < 1e-10);
    CHECK(max_abs_diff(a.beta, b.beta) < 1e-10);

    const auto probe_g = num::normal_tensor({6}, 1.0, rng), probe_b = num::normal_tensor({6}, 1.0, rng);
    const auto res = testing::check_gradients(
        [&] {
          const auto c = memory_augment(x, mem);
          return num::sum(num::tanh(c.gamma) * probe_g + c.beta * c.beta * probe_b);
        },
        named(mem));
    INFO(res.worst);
    CHECK(res.max_rel_error < 1e-6);
  }

  auto rng = num::make_rng(99);
  auto mem = MemoryAugment::init(cfg, rng);
  const auto one = num::normal_tensor({10, 1}, 1.0, rng);
  Tensor h = mem.projection(one);
  for (const auto& blk : mem.blocks) h = blk(h);
  CHECK(max_abs_diff(mem.pooled(one), num::reshape(h, {8})) == 0.0);
  CHECK_THROWS_AS(memory_augment(TimbreSequence{Tensor::zeros({9, 2}), 6}, mem), InputError);
}

TEST_CASE("context_aware_fuse: length contract, key permutation invariance, gradients") {
  ContextConfig cfg{5, 7, 8, 2, 2, 12};
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto rng = num::make_rng(seed, {12});
    auto ctx = ContextAwareFusion::init(cfg, rng);
    const std::size_t tp = 3 + seed % 4, tr = 2 + seed % 5;
    const auto content = num::normal_tensor({5, tp}, 1.0, rng);
    const TimbreSequence timbre{num::normal_tensor({7, tr}, 1.0, rng), 3};
    for (std::size_t t_mel : {std::size_t{1}, tp, tp * 2 + 1, std::size_t{40}}) {
      CHECK(context_aware_fuse(content, timbre, t_mel, ctx).length() == t_mel);
    }
    CHECK(context_aware_fuse(content, timbre, tp, ctx).frames.to_vector() == ctx.attend(content, timbre.frames).to_vector());

    const auto base = context_aware_fuse(content, timbre, 11, ctx);
    const TimbreSequence shuffled{permute_cols(timbre.frames, dsp::shuffle_permutation(tr, seed + 3)), 3};
    CHECK(max_abs_diff(base.frames, context_aware_fuse(content, shuffled, 11, ctx).frames) < 1e-10);

    std::vector<Tensor> weights;
    ctx.attend(content, timbre.frames, &weights);
    CHECK(weights.size() == cfg.blocks * cfg.heads);
    for (const auto& a : weights)
      for (std::size_t i = 0; i < a.cols(); ++i) {
        double s = 0;
        for (std::size_t j = 0; j < a.rows(); ++j) s += a.at(j, i);
        CHECK(std::abs(s - 1.0) <= 1e-12);
      }

    const auto probe = num::normal_tensor({8, 9}, 1.0, rng);
    const auto res = testing::check_gradients(
        [&] { return num::mean(context_aware_fuse(content, timbre, 9, ctx).frames * probe); }, named(ctx));
    INFO(res.worst);
    CHECK(res.max_rel_error < 1e-6);
  }
  auto rng = num::make_rng(5);
  auto ctx = ContextAwareFusion::init(cfg, rng);
  CHECK_THROWS_AS(context_aware_fuse(Tensor::zeros({4, 3}), TimbreSequence{Tensor::zeros({7, 2}), 3}, 5, ctx),
                  InputError);
  CHECK_THROWS_AS(context_aware_fuse(Tensor::zeros({5, 3}), TimbreSequence{Tensor::zeros({7, 2}), 3}, 0, ctx),
                  InputError);
}

TEST_CASE("speaker embedding: deterministic, unit norm, speaker separation") {
  const SpeakerEmbedder embedder(7);
  const auto a1 = voice(120, 1.0, 1), a2 = voice(120, 1.0, 2);
  const auto b1 = voice(220, 2.0, 3), b2 = voice(220, 2.0, 4);
  const auto ea1 = embedder.embed(a1);
  CHECK(ea1.vector.to_vector() == embedder.embed(a1).vector.to_vector());
  CHECK(ea1.dim() == 192);
  double n = 0;
  for (double v : ea1.vector.data()) n += v * v;
  CHECK(std::abs(std::sqrt(n) - 1.0) <= 1e-12);

  const auto ea2 = embedder.embed(a2), eb1 = embedder.embed(b1), eb2 = embedder.embed(b2);
  const double within = std::min(cosine_similarity(ea1, ea2), cosine_similarity(eb1, eb2));
  const double across = std::max({cosine_similarity(ea1, eb1), cosine_similarity(ea1, eb2), cosine_similarity(ea2, eb1),
                                  cosine_similarity(ea2, eb2)});
  CHECK(across < within);
  CHECK_THROWS_AS(embedder.embed(dsp::Waveform{std::vector<double>(500, 0.0), 16000.0}), InputError);
}

TEST_CASE("reference timbre: shape, permuted segment frames, shared embedding suffix") {
  const SpeakerEmbedder embedder(7);
  const auto ref = voice(150, 1.5, 8, 3.5);
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto seq = build_reference_timbre(ref, seed, embedder);
    CHECK(seq.width() == 80 + 192);
    CHECK(seq.n_mels == 80);

    const auto seg = pick_reference_segment(ref.samples.size(), 16000.0, 256, seed, {});
    CHECK(seg.start % 256 == 0);
    CHECK(seg.length >= 32000);
    CHECK(seg.length <= 56000);
    dsp::Waveform piece{{ref.samples.begin() + static_cast<long>(seg.start),
                         ref.samples.begin() + static_cast<long>(seg.start + seg.length)},
                        16000.0};
    const auto mel = dsp::mel_spectrogram(piece, dsp::MelConfig{});
    REQUIRE(seq.length() == mel.num_frames());
    std::vector<std::vector<double>> from_seq, from_mel;
    for (std::size_t t = 0; t < seq.length(); ++t) {
      std::vector<double> a, b;
      for (std::size_t k = 0; k < 80; ++k) {
        a.push_back(seq.frames.at(k, t));
        b.push_back(mel.frames.at(t, k));
      }
      from_seq.push_back(a);
      from_mel.push_back(b);
    }
    CHECK(from_seq != from_mel);
    std::sort(from_seq.begin(), from_seq.end());
    std::sort(from_mel.begin(), from_mel.end());
    CHECK(from_seq == from_mel);

    const auto e = embedder.embed(ref);
    for (std::size_t t = 0; t < seq.length(); ++t)
      for (std::size_t k = 0; k < 192; ++k) CHECK(seq.frames.at(80 + k, t) == e.vector.at(k));
  }
  CHECK_THROWS_AS(build_reference_timbre(voice(150, 1.5, 8, 1.5), 1, embedder), InputError);
}

TEST_CASE("reference timbre from cached analysis equals the waveform path bit for bit") {
  const SpeakerEmbedder embedder(7);
  const auto ref = voice(180, 1.2, 9, 4.3);
  const dsp::MelConfig mc;
  const auto raw = dsp::mel_spectrogram(ref, mc);
  const auto e = embedder.embed(ref);
  const dsp::MelNorm norm{-4.0, 2.5};
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const auto a = build_reference_timbre(ref, seed, embedder, {}, norm);
    const auto b = build_reference_timbre(raw, ref.samples.size(), 16000.0, e, seed, mc, {}, norm);
    REQUIRE(a.frames.shape() == b.frames.shape());
    CHECK(a.frames.to_vector() == b.frames.to_vector());
  }
  CHECK_THROWS_AS(build_reference_timbre(raw, ref.samples.size() + 256, 16000.0, e, 1, mc), InputError);
}
