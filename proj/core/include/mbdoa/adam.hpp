#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace mbdoa {

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct AdamState {
    std::vector<double> first_moment;
    std::vector<double> second_moment;
    std::uint64_t step = 0;

    explicit AdamState(std::size_t dimension = 0) : first_moment(dimension, 0.0), second_moment(dimension, 0.0) {}
};

/// One bias-corrected Adam update of `params` in place.
void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads, const AdamConfig& config);

}  // namespace mbdoa
