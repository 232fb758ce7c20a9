#include "mbdoa/rng.hpp"

#include <cmath>

namespace mbdoa {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace

Rng make_stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    std::uint64_t h = splitmix64(seed);
    h = splitmix64(h ^ splitmix64(a + 0x632be59bd9b4e019ULL));
    h = splitmix64(h ^ splitmix64(b + 0x85157af5ULL));
    std::seed_seq seq{static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32),
                      static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b)};
    return Rng(seq);
}

std::complex<double> complex_normal(Rng& rng) {
    // Box-Muller keeps the draw count fixed per sample (two uniforms).
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double u1 = unit(rng);
    const double u2 = unit(rng);
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    const double r = std::sqrt(-std::log(u1));  // |z|^2 ~ Exp(1)
    const double phase = 2.0 * M_PI * u2;
    return {r * std::cos(phase), r * std::sin(phase)};
}

}  // namespace mbdoa
