#include "mbdoa/heads.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mbdoa/errors.hpp"

namespace mbdoa {

namespace {

constexpr double kLogNoiseLimit = 700.0;

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

}  // namespace

LatentParams apply_heads(const HeadLayout& layout, std::span<const double> raw) {
    if (raw.size() != layout.size()) throw ConfigError("apply_heads: raw output has wrong length");
    const std::size_t k = layout.sources;
    LatentParams latent;

    latent.angles.resize(k);
    const double below_two_pi = std::nextafter(kTwoPi, 0.0);
    for (std::size_t i = 0; i < k; ++i) {
        latent.angles[i] = std::min(kTwoPi * sigmoid(raw[layout.angle_offset() + i]), below_two_pi);
    }

    latent.powers.resize(k);
    const auto logits = raw.subspan(layout.power_offset(), k);
    const double peak = *std::max_element(logits.begin(), logits.end());
    double total = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        latent.powers[i] = std::exp(logits[i] - peak);
        total += latent.powers[i];
    }
    for (auto& p : latent.powers) p = std::max(p / total, std::numeric_limits<double>::min());

    const auto kk = static_cast<Eigen::Index>(k);
    latent.factor = CMatrix::Identity(kk, kk);
    if (layout.mode == CovarianceMode::full) {
        std::size_t pos = layout.factor_offset();
        for (Eigen::Index i = 1; i < kk; ++i) {
            for (Eigen::Index j = 0; j < i; ++j) {
                latent.factor(i, j) = cdouble(raw[pos], raw[pos + 1]);
                pos += 2;
            }
        }
    }

    const double w = std::clamp(raw[layout.noise_offset()], -kLogNoiseLimit, kLogNoiseLimit);
    latent.noise_variance = std::exp(w);
    return latent;
}

std::vector<double> invert_heads(const HeadLayout& layout, const LatentParams& latent) {
    const std::size_t k = layout.sources;
    if (latent.sources() != k) throw ConfigError("invert_heads: source count mismatch");
    std::vector<double> raw(layout.size(), 0.0);
    for (std::size_t i = 0; i < k; ++i) {
        const double t = std::clamp(latent.angles[i] / kTwoPi, 1e-15, 1.0 - 1e-15);
        raw[layout.angle_offset() + i] = std::log(t / (1.0 - t));
        raw[layout.power_offset() + i] = std::log(latent.powers[i]);
    }
    if (layout.mode == CovarianceMode::full) {
        std::size_t pos = layout.factor_offset();
        for (Eigen::Index i = 1; i < static_cast<Eigen::Index>(k); ++i) {
            for (Eigen::Index j = 0; j < i; ++j) {
                raw[pos] = latent.factor(i, j).real();
                raw[pos + 1] = latent.factor(i, j).imag();
                pos += 2;
            }
        }
    }
    raw[layout.noise_offset()] = std::log(latent.noise_variance);
    return raw;
}

}  // namespace mbdoa
