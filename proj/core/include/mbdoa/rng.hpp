#pragma once

#include <complex>
#include <cstdint>
#include <random>

namespace mbdoa {

using Rng = std::mt19937_64;

/// Derives an independent stream from a base seed and up to two stream indices.
/// Results depend only on the arguments, never on scheduling.
Rng make_stream(std::uint64_t seed, std::uint64_t a = 0, std::uint64_t b = 0);

/// Circularly-symmetric complex Gaussian with unit variance:
/// real and imaginary parts i.i.d. N(0, 1/2).
std::complex<double> complex_normal(Rng& rng);

}  // namespace mbdoa
