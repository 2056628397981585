#include <cmath>
#include <limits>
#include <vector>

#include "doctest.h"
#include "flowvc/numerics/layers.hpp"
#include "flowvc/numerics/ops.hpp"
#include "flowvc/numerics/optim.hpp"
#include "flowvc/numerics/random.hpp"
#include "support/gradcheck.hpp"

using namespace flowvc::num;
using flowvc::testing::check_gradients;
using flowvc::testing::probe_weights;

namespace {

std::vector<double> naive_matmul(const Tensor& a, const Tensor& b) {
  std::vector<double> c(a.rows() * b.cols(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j)
      for (std::size_t k = 0; k < a.cols(); ++k) c[i * b.cols() + j] += a.at(i, k) * b.at(k, j);
  return c;
}

std::vector<double> naive_conv(const Tensor& x, const Tensor& w, std::size_t stride, std::size_t pad) {
  const std::size_t cin = x.rows(), t = x.cols(), cout = w.dim(0), k = w.dim(2);
  const std::size_t tout = (t + 2 * pad - k) / stride + 1;
  std::vector<double> y(cout * tout, 0.0);
  for (std::size_t o = 0; o < cout; ++o)
    for (std::size_t s = 0; s < tout; ++s)
      for (std::size_t i = 0; i < cin; ++i)
        for (std::size_t j = 0; j < k; ++j) {
          const long src = static_cast<long>(s * stride + j) - static_cast<long>(pad);
          if (src < 0 || src >= static_cast<long>(t)) continue;
          y[o * tout + s] += w.data()[(o * cin + i) * k + j] * x.at(i, static_cast<std::size_t>(src));
        }
  return y;
}

}  // namespace

TEST_CASE("matmul identity and hand computation") {
  auto eye = Tensor::matrix({{1, 0}, {0, 1}});
  auto b = Tensor::matrix({{3, 4}, {5, 6}});
  CHECK(matmul(eye, b).to_vector() == std::vector<double>{3, 4, 5, 6});
  CHECK(matmul(Tensor::matrix({{1, 2}}), Tensor::matrix({{3}, {4}})).item() == 11.0);
}

TEST_CASE("matmul matches triple-loop oracle") {
  auto rng = make_rng(11);
  auto a = normal_tensor({5, 7}, 1.0, rng);
  auto b = normal_tensor({7, 3}, 1.0, rng);
  const auto got = matmul(a, b).to_vector();
  const auto want = naive_matmul(a, b);
  for (std::size_t i = 0; i < want.size(); ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-13));
}

TEST_CASE("matmul rejects mismatched inner dimensions") {
  CHECK_THROWS_AS(matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3})), TensorError);
}

TEST_CASE("conv1d identity kernel and box sum") {
  auto x = Tensor::matrix({{1, 2, 3}});
  auto k1 = Tensor::from({1, 1, 1}, {1.0});
  CHECK(conv1d(x, k1).to_vector() == std::vector<double>{1, 2, 3});
  auto x4 = Tensor::matrix({{1, 2, 3, 4}});
  auto box = Tensor::from({1, 1, 2}, {1.0, 1.0});
  CHECK(conv1d(x4, box).to_vector() == std::vector<double>{3, 5, 7});
}

TEST_CASE("conv1d matches nested-loop oracle, including stride and padding") {
  auto rng = make_rng(5);
  auto x = normal_tensor({3, 16}, 1.0, rng);
  auto w = normal_tensor({4, 3, 5}, 1.0, rng);
  for (auto [stride, pad] : {std::pair<std::size_t, std::size_t>{1, 0}, {1, 2}, {2, 1}, {3, 2}}) {
    const auto got = conv1d(x, w, stride, pad);
    const auto want = naive_conv(x, w, stride, pad);
    REQUIRE(got.numel() == want.size());
    CHECK(got.cols() == (16 + 2 * pad - 5) / stride + 1);
    for (std::size_t i = 0; i < want.size(); ++i) CHECK(got.data()[i] == doctest::Approx(want[i]).epsilon(1e-13));
  }
}

TEST_CASE("conv1d rejects a kernel wider than the padded input") {
  CHECK_THROWS_AS(conv1d(Tensor::zeros({1, 3}), Tensor::zeros({1, 1, 6}), 1, 1), TensorError);
  CHECK_NOTHROW(conv1d(Tensor::zeros({1, 3}), Tensor::zeros({1, 1, 5}), 1, 1));
}

TEST_CASE("softmax examples") {
  auto u = softmax(Tensor::vector({0, 0, 0}), 0);
  for (double v : u.data()) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  auto big = softmax(Tensor::vector({1000, 1000}), 0);
  CHECK(big.at(0) == 0.5);
  CHECK(big.at(1) == 0.5);

  // Direct exp/sum oracle in long double.
  auto s = softmax(Tensor::vector({1, 2, 3}), 0);
  const long double z = std::exp(1.0L) + std::exp(2.0L) + std::exp(3.0L);
  for (int i = 0; i < 3; ++i) {
    CHECK(std::abs(s.at(i) - static_cast<double>(std::exp(static_cast<long double>(i + 1)) / z)) < 1e-12);
  }
}

TEST_CASE("softmax rows are stochastic on random inputs") {
  auto rng = make_rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    auto x = normal_tensor({6, 9}, 10.0, rng);
    for (std::size_t axis : {0u, 1u}) {
      auto y = softmax(x, axis);
      const std::size_t lanes = axis == 1 ? 6 : 9, len = axis == 1 ? 9 : 6;
      for (std::size_t l = 0; l < lanes; ++l) {
        double total = 0.0;
        for (std::size_t e = 0; e < len; ++e) {
          const double v = axis == 1 ? y.at(l, e) : y.at(e, l);
          CHECK(v > 0.0);
          CHECK(v < 1.0);
          total += v;
        }
        CHECK(std::abs(total - 1.0) < 1e-12);
      }
    }
  }
  CHECK_THROWS_AS(softmax(Tensor::zeros({2, 2}), 2), TensorError);
}

TEST_CASE("backward: linear and quadratic hand cases") {
  auto w = Tensor::vector({0.5, -1.0, 2.0}, true);
  auto x = Tensor::vector({3.0, 4.0, 5.0});
  backward(sum(w * x));
  CHECK(w.grad() == std::vector<double>{3.0, 4.0, 5.0});

  auto q = Tensor::vector({1.0, -2.0}, true);
  backward(sum(q * q));
  CHECK(q.grad() == std::vector<double>{2.0, -4.0});
}

TEST_CASE("backward rejects a non-scalar loss") {
  auto w = Tensor::vector({1.0, 2.0}, true);
  CHECK_THROWS_AS(backward(w * w), TensorError);
}

TEST_CASE("unreachable and frozen parameters") {
  auto used = Tensor::vector({1.0, 2.0}, true);
  auto unused = Tensor::vector({3.0, 4.0}, true);
  auto frozen = Tensor::vector({5.0, 6.0}, false);
  backward(sum(used * frozen));
  CHECK(unused.grad() == std::vector<double>{0.0, 0.0});
  CHECK_FALSE(unused.has_grad());
  CHECK_FALSE(frozen.has_grad());
  CHECK(used.grad() == std::vector<double>{5.0, 6.0});
}

TEST_CASE("shared subexpressions are traversed once per node") {
  auto w = Tensor::vector({2.0}, true);
  auto y = w * w;         // 4
  auto z = sum(y + y);    // 2 w^2 -> dz/dw = 4w = 8
  backward(z);
  CHECK(w.grad()[0] == 8.0);
}

TEST_CASE("non-finite values surface as errors") {
  CHECK_THROWS_AS(Tensor::vector({std::numeric_limits<double>::quiet_NaN()}), TensorError);
  auto big = Tensor::vector({1e308});
  CHECK_THROWS_AS(scale(big, 10.0), TensorError);
}

TEST_CASE("interpolation: hand cases") {
  auto x = Tensor::matrix({{0, 1, 2}});
  CHECK(interpolate_time(x, 5).to_vector() == std::vector<double>{0, 0.5, 1, 1.5, 2});
  CHECK(interpolate_time(x, 3).same_node(x));
  auto one = Tensor::matrix({{7}});
  CHECK(interpolate_time(one, 4).to_vector() == std::vector<double>{7, 7, 7, 7});
}

TEST_CASE("normalization layers produce zero-mean unit-variance groups") {
  auto rng = make_rng(2);
  auto x = normal_tensor({8, 5}, 3.0, rng);
  auto aff = NormAffine::init(8);
  auto ln = layer_norm(x, aff.gamma, aff.beta);
  for (std::size_t t = 0; t < 5; ++t) {
    double m = 0, v = 0;
    for (std::size_t c = 0; c < 8; ++c) m += ln.at(c, t);
    m /= 8;
    for (std::size_t c = 0; c < 8; ++c) v += (ln.at(c, t) - m) * (ln.at(c, t) - m);
    CHECK(std::abs(m) < 1e-12);
    CHECK(v / 8 == doctest::Approx(1.0).epsilon(1e-4));
  }
  auto gn = group_norm(x, 2, aff.gamma, aff.beta);
  double m = 0;
  for (std::size_t c = 0; c < 4; ++c)
    for (std::size_t t = 0; t < 5; ++t) m += gn.at(c, t);
  CHECK(std::abs(m) < 1e-12);
  CHECK_THROWS_AS(group_norm(x, 3, aff.gamma, aff.beta), TensorError);
}

TEST_CASE("finite-difference oracle on every op over 10 seeds") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    auto rng = make_rng(seed, {101});
    auto x = normal_tensor({4, 9}, 1.0, rng, true);
    auto w = normal_tensor({6, 4, 3}, 0.5, rng, true);
    auto b = normal_tensor({6}, 0.5, rng, true);
    auto m = normal_tensor({9, 5}, 0.5, rng, true);
    auto aff = NormAffine{normal_tensor({6}, 1.0, rng, true), normal_tensor({6}, 1.0, rng, true)};
    auto g = normal_tensor({6}, 1.0, rng, true);
    auto probe = probe_weights({6, 5}, seed);
    auto probe2 = probe_weights({6, 6}, seed + 100);

    auto loss = [&] {
      auto h = conv1d(x, w, b, 2, 1);          // [6 x 5]
      h = silu(h);
      h = group_norm(h, 3, aff.gamma, aff.beta);
      h = mul_per_row(h, g);
      auto wide = matmul(conv1d(x, w, 1, 1), m); // [6 x 5]
      h = h + tanh(wide);
      h = layer_norm(h, aff.gamma, aff.beta);
      auto attn = softmax(matmul(h, transpose(h)), 1);  // [6 x 6]
      auto pooled = mean_cols(h);
      auto cat = concat_rows({slice_rows(h, 0, 3), slice_rows(h, 3, 6)});
      auto stretched = interpolate_time(slice_cols(cat, 1, 4), 5);
      return sum(probe * (cat + stretched)) + sum(probe2 * attn) + sum(pooled * pooled) +
             mse(add_per_row(h, b), broadcast_cols(g, 5));
    };
    auto r = check_gradients(loss, {{"x", x}, {"w", w}, {"b", b}, {"m", m}, {"gamma", aff.gamma},
                                    {"beta", aff.beta}, {"g", g}});
    INFO("seed " << seed << " worst " << r.worst);
    CHECK(r.max_rel_error < 1e-6);
  }
}

TEST_CASE("straight-through passes gradient to its input") {
  auto x = Tensor::vector({0.2, 0.7}, true);
  auto q = Tensor::vector({0.0, 1.0});
  auto y = straight_through(x, q);
  CHECK(y.to_vector() == q.to_vector());
  backward(sum(scale(y, 3.0)));
  CHECK(x.grad() == std::vector<double>{3.0, 3.0});
}

TEST_CASE("adam: zero gradient without weight decay leaves params unchanged") {
  std::vector<double> p{1.5, -2.0};
  std::vector<double> g{0.0, 0.0};
  AdamState st;
  AdamConfig cfg;
  cfg.weight_decay = 0.0;
  for (int i = 0; i < 5; ++i) adam_step(p, g, st, cfg);
  CHECK(p == std::vector<double>{1.5, -2.0});
  CHECK(st.step == 5);
}

TEST_CASE("adam: single step matches hand trace") {
  AdamConfig cfg;  // lr 1e-4, b1 0.9, b2 0.999, eps 1e-8, wd 0.01
  CHECK(cfg.lr == 1e-4);
  std::vector<double> p{0.5};
  std::vector<double> g{1.0};
  AdamState st;
  adam_step(p, g, st, cfg);
  // m = 0.1, v = 0.001; bias-corrected mhat = 1, vhat = 1.
  const double expected = 0.5 * (1.0 - 1e-4 * 0.01) - 1e-4 * 1.0 / (1.0 + 1e-8);
  CHECK(p[0] == doctest::Approx(expected).epsilon(1e-15));
  CHECK(st.m[0] == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(st.v[0] == doctest::Approx(0.001).epsilon(1e-15));
  CHECK(0.5 - p[0] == doctest::Approx(1e-4).epsilon(1e-3));
}

TEST_CASE("adam: shape mismatch is rejected") {
  std::vector<double> p{1.0, 2.0};
  std::vector<double> g{1.0};
  AdamState st;
  CHECK_THROWS_AS(adam_step(p, g, st, AdamConfig{}), TensorError);
}

TEST_CASE("AdamW minimizes a quadratic") {
  auto w = Tensor::vector({3.0, -2.0}, true);
  AdamConfig cfg;
  cfg.lr = 0.05;
  cfg.weight_decay = 0.0;
  AdamW opt({w}, cfg);
  for (int i = 0; i < 500; ++i) {
    opt.zero_grad();
    backward(sum(w * w));
    opt.step();
  }
  CHECK(std::abs(w.at(0)) < 1e-2);
  CHECK(std::abs(w.at(1)) < 1e-2);
}

TEST_CASE("AdamW: set_lr scales the next update") {
  // The first bias-corrected step moves each weight by lr (for eps << |g|).
  auto w = Tensor::vector({1.0}, true);
  AdamW opt({w}, {0.1, 0.9, 0.999, 1e-12, 0.0});
  opt.set_lr(0.25);
  CHECK(opt.config().lr == 0.25);
  opt.zero_grad();
  backward(sum(w * w));
  opt.step();
  CHECK(w.at(0) == doctest::Approx(0.75).epsilon(1e-12));
  CHECK_THROWS_AS(opt.set_lr(0.0), TensorError);
  CHECK_THROWS_AS(opt.set_lr(-1.0), TensorError);
}

TEST_CASE("seeded generators are reproducible and stream-separated") {
  auto a = make_rng(42, {1});
  auto b = make_rng(42, {1});
  auto c = make_rng(42, {2});
  const auto va = a(), vb = b(), vc = c();
  CHECK(va == vb);
  CHECK(va != vc);
  auto r = make_rng(9);
  for (int i = 0; i < 1000; ++i) CHECK(uniform_index(r, 7) < 7);
}
