#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

#include "flowvc/numerics/tensor.hpp"

namespace flowvc::num {

using Rng = std::mt19937_64;

/// Generator seeded from a base seed plus stream identifiers, so independent
/// consumers (per training step, per module) draw from unrelated sequences.
Rng make_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> streams = {});

/// Uniform integer in [0, n) by rejection sampling on the raw 64-bit output.
std::uint64_t uniform_index(Rng& rng, std::uint64_t n);
/// Uniform double in [0, 1) from the top 53 bits.
double uniform01(Rng& rng);
double standard_normal(Rng& rng);

Tensor normal_tensor(Shape shape, double stddev, Rng& rng, bool requires_grad = false);
Tensor uniform_tensor(Shape shape, double lo, double hi, Rng& rng, bool requires_grad = false);

}  // namespace flowvc::num
