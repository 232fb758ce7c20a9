#pragma once

// Root-mean-square periodic error and Monte-Carlo sweeps.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "mbdoa/array_model.hpp"
#include "mbdoa/estimators.hpp"

namespace mbdoa {

/// mod_[-pi, pi)(x).
double wrap_to_pi(double x);

struct MatchedErrors {
    std::vector<double> errors;           // errors[k] = wrap(truth[k] - estimate[assignment[k]])
    std::vector<std::size_t> assignment;
};

/// Pairs truth and estimate angles by the permutation with the least total
/// squared periodic error (exhaustive search over K! permutations).
MatchedErrors periodic_error(std::span<const double> truth, std::span<const double> estimate);

struct AnglePair {
    std::vector<double> truth;
    std::vector<double> estimate;
};

double rmspe(std::span<const AnglePair> pairs);

enum class SweepKind { snr, correlation, cdf };

struct SweepSpec {
    SweepKind kind = SweepKind::snr;
    std::size_t sources = 3;
    std::size_t snapshots = 100;
    /// Swept quantity: SNR in dB (snr) or rho (correlation, cdf).
    std::vector<double> values;
    std::size_t trials = 500;
    double snr_db = 20.0;  // fixed SNR for correlation / cdf sweeps
    /// Correlation model for snr sweeps.
    CorrelationMode correlation = CorrelationMode::uncorrelated;
    double rho = 0.0;
    double power_min_db = -9.0;
    double power_max_db = 0.0;
    std::uint64_t seed = 0;
    std::size_t threads = 1;

    void validate() const;
    /// Scenario distribution for the sweep point `value`.
    ScenarioConfig scenario_at(double value) const;
};

struct SweepCell {
    double value = 0.0;
    std::string estimator;
    double rmspe = 0.0;
    std::size_t trials = 0;
    std::size_t outliers = 0;
    std::vector<double> error_samples;  // |matched error| per angle, trial-major
    double wall_seconds = 0.0;
};

struct SweepResult {
    SweepKind kind = SweepKind::snr;
    std::vector<SweepCell> cells;  // value-major, estimators in the order given

    const SweepCell& cell(double value, const std::string& estimator) const;
    /// `sweep_value,estimator,rmspe,trials,outlier_count`
    void write_csv(std::ostream& out) const;
    /// `estimator,error_sample`
    void write_cdf_csv(std::ostream& out) const;
};

using EstimatorList = std::vector<std::shared_ptr<const Estimator>>;

/// Runs every estimator on the same simulated batch for each (value, trial).
/// Trial streams derive from (seed, value index, trial index) only, so results
/// do not depend on the thread count. Estimator exceptions count as outliers
/// scored at error pi per angle.
SweepResult run_sweep(const SweepSpec& spec, const ArrayGeometry& geometry, const EstimatorList& estimators);

}  // namespace mbdoa
