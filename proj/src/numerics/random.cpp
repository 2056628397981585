#include "flowvc/numerics/random.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace flowvc::num {

Rng make_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> streams) {
  std::vector<std::uint32_t> words;
  words.reserve(2 + 2 * streams.size());
  auto push = [&words](std::uint64_t v) {
    words.push_back(static_cast<std::uint32_t>(v & 0xffffffffu));
    words.push_back(static_cast<std::uint32_t>(v >> 32));
  };
  push(seed);
  for (auto s : streams) push(s);
  std::seed_seq seq(words.begin(), words.end());
  return Rng(seq);
}

std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  if (n == 0) throw TensorError("uniform_index: empty range");
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t r = rng();
  while (r >= limit) r = rng();
  return r % n;
}

double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

double standard_normal(Rng& rng) {
  // Box-Muller; 1 - u keeps the log argument in (0, 1].
  const double u1 = 1.0 - uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

Tensor normal_tensor(Shape shape, double stddev, Rng& rng, bool requires_grad) {
  std::vector<double> data(shape_numel(shape));
  for (auto& v : data) v = stddev * standard_normal(rng);
  return Tensor::from(std::move(shape), std::move(data), requires_grad);
}

Tensor uniform_tensor(Shape shape, double lo, double hi, Rng& rng, bool requires_grad) {
  std::vector<double> data(shape_numel(shape));
  for (auto& v : data) v = lo + (hi - lo) * uniform01(rng);
  return Tensor::from(std::move(shape), std::move(data), requires_grad);
}

}  // namespace flowvc::num
