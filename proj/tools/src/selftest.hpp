#pragma once

// Gradient checks and invariant suites shared by `mbdoa selftest` and the
// acceptance runner.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace mbdoa::cli {

struct CheckResult {
    std::string name;
    std::size_t cases = 0;
    std::size_t failures = 0;
    double worst = 0.0;      // largest error statistic seen
    double tolerance = 0.0;

    bool passed() const { return cases > 0 && failures == 0; }
};

/// Analytic loss gradients vs central differences (h = 1e-5), K=3, M=9,
/// both losses, alternating diag/full heads.
CheckResult check_loss_gradients(std::uint64_t seed, std::size_t cases);
/// Encoder + SML gradient vs central differences on a tiny network.
CheckResult check_backprop(std::uint64_t seed, std::size_t points);
CheckResult check_steering_modulus(std::uint64_t seed, std::size_t cases);
/// Head outputs stay in range for extreme raw inputs.
CheckResult check_head_ranges(std::uint64_t seed, std::size_t cases);
CheckResult check_model_covariance_psd(std::uint64_t seed, std::size_t cases);
/// RMSPE ignores estimate order and 2pi shifts.
CheckResult check_metric_permutation(std::uint64_t seed, std::size_t cases);
/// MUSIC peaks are unchanged when the sample covariance is scaled.
CheckResult check_music_scale(std::uint64_t seed, std::size_t cases);

std::vector<CheckResult> run_invariant_suites(std::uint64_t seed, std::size_t cases);

void print_check(std::ostream& out, const CheckResult& r);

}  // namespace mbdoa::cli
