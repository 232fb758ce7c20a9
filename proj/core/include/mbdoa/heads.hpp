#pragma once

// Output heads mapping unconstrained network outputs to valid latent parameters.
//
// Raw layout (length K + K + K(K-1) + 1, or 2K + 1 in diag mode):
//   [0, K)            angle logits          theta_k = 2pi * sigmoid(u_k)
//   [K, 2K)           power logits          Lambda  = softmax(v)
//   [2K, 2K+K(K-1))   factor entries        (re, im) of L_ij, i > j, row-major
//   last              log noise variance    sigma^2 = exp(w)

#include <cstddef>
#include <span>
#include <vector>

#include "mbdoa/array_model.hpp"

namespace mbdoa {

struct HeadLayout {
    std::size_t sources = 3;
    CovarianceMode mode = CovarianceMode::diag;

    std::size_t factor_entries() const {
        return mode == CovarianceMode::full ? sources * (sources - 1) / 2 : 0;
    }
    std::size_t angle_offset() const { return 0; }
    std::size_t power_offset() const { return sources; }
    std::size_t factor_offset() const { return 2 * sources; }
    std::size_t noise_offset() const { return 2 * sources + 2 * factor_entries(); }
    std::size_t size() const { return noise_offset() + 1; }
};

/// Applies sigmoid*2pi / softmax / identity / exp to a raw output vector.
LatentParams apply_heads(const HeadLayout& layout, std::span<const double> raw);

/// A raw vector that `apply_heads` maps back onto `latent` (softmax is only
/// invertible up to a constant; the log-powers representative is returned).
std::vector<double> invert_heads(const HeadLayout& layout, const LatentParams& latent);

}  // namespace mbdoa
