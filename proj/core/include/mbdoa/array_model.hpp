#pragma once

// Narrowband far-field signal model for a uniform circular array:
//   y(t) = A(theta) s(t) + n(t),  s ~ CN(0, C_s),  n ~ CN(0, sigma^2 I)
//   C_s  = Lambda^{1/2} L L^H Lambda^{1/2}
//   C_y  = A C_s A^H + sigma^2 I

#include <cstddef>
#include <span>
#include <vector>

#include "mbdoa/linalg.hpp"
#include "mbdoa/rng.hpp"

namespace mbdoa {

inline constexpr double kTwoPi = 6.283185307179586476925286766559;

enum class ArrayKind { uca };

struct ArrayGeometry {
    ArrayKind kind = ArrayKind::uca;
    std::size_t antennas = 9;
    double radius_over_wavelength = 1.0;

    /// Throws DomainError unless antennas >= 2 and R/lambda > 0.
    void validate() const;
};

/// Whether the learned signal covariance keeps off-diagonal correlation.
/// `diag` pins the correlation factor to the identity.
enum class CovarianceMode { diag, full };

/// Ground truth used to synthesise data.
struct Scenario {
    std::vector<double> angles;  // radians in [0, 2pi)
    std::vector<double> powers;  // positive, sum to 1
    CMatrix factor;              // C_rho = factor factor^H
    double noise_variance = 1.0;
    double correlation = 0.0;    // rho used to build `factor`

    std::size_t sources() const { return angles.size(); }
    double snr_db() const;
};

/// Decoder input: the encoder's estimate of the model parameters.
/// `factor` is lower unitriangular (unit diagonal, free strictly-lower entries).
struct LatentParams {
    std::vector<double> angles;
    std::vector<double> powers;
    CMatrix factor;
    double noise_variance = 1.0;

    std::size_t sources() const { return angles.size(); }
    void validate() const;
};

/// M snapshots as columns, plus their sample covariance.
struct SnapshotBatch {
    CMatrix snapshots;          // M x N
    CMatrix sample_covariance;  // M x M

    std::size_t antennas() const { return static_cast<std::size_t>(snapshots.rows()); }
    std::size_t count() const { return static_cast<std::size_t>(snapshots.cols()); }
};

enum class CorrelationMode { uncorrelated, fixed, uniform };

struct ScenarioConfig {
    std::size_t sources = 3;
    std::size_t snapshots = 100;
    CorrelationMode correlation = CorrelationMode::uncorrelated;
    double rho = 0.0;  // used when correlation == fixed
    double snr_min_db = -10.0;
    double snr_max_db = 30.0;
    double power_min_db = -9.0;
    double power_max_db = 0.0;

    void validate() const;
};

/// a(theta)_m = exp(-j 2pi (R/lambda) cos(theta - 2pi m / M)).
CVector steering_vector(const ArrayGeometry& geometry, double theta);

/// d a(theta) / d theta.
CVector steering_derivative(const ArrayGeometry& geometry, double theta);

/// A(theta) = [a(theta_1), ..., a(theta_K)].
CMatrix steering_matrix(const ArrayGeometry& geometry, std::span<const double> angles);

/// Toeplitz correlation pattern with entries rho^|i-j|.
CMatrix correlation_matrix(double rho, std::size_t sources);

/// Lambda^{1/2} F F^H Lambda^{1/2}.
CMatrix signal_covariance(std::span<const double> powers, const CMatrix& factor);

/// A C_s A^H + sigma^2 I for an explicit signal covariance.
CMatrix model_covariance(const ArrayGeometry& geometry, std::span<const double> angles,
                         const CMatrix& signal_cov, double noise_variance);

/// The model-based decoder: latent parameters to C_y.
CMatrix model_covariance(const ArrayGeometry& geometry, const LatentParams& latent);

/// (1/N) Y Y^H, exactly Hermitian.
CMatrix sample_covariance(const CMatrix& snapshots);

SnapshotBatch sample_snapshots(const ArrayGeometry& geometry, const Scenario& scenario,
                               std::size_t count, Rng& rng);

Scenario draw_scenario(const ScenarioConfig& config, Rng& rng);

/// Maps an angle into [0, 2pi).
double wrap_to_two_pi(double theta);

}  // namespace mbdoa
