#include "mbdoa/array_model.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "mbdoa/errors.hpp"

namespace mbdoa {

void ArrayGeometry::validate() const {
    if (antennas < 2) throw DomainError("array geometry: need at least 2 antennas");
    if (!(radius_over_wavelength > 0.0) || !std::isfinite(radius_over_wavelength)) {
        throw DomainError("array geometry: radius/wavelength must be positive");
    }
}

double Scenario::snr_db() const { return -10.0 * std::log10(noise_variance); }

void LatentParams::validate() const {
    const std::size_t k = angles.size();
    if (k == 0 || powers.size() != k) throw DomainError("latent: angle/power count mismatch");
    if (static_cast<std::size_t>(factor.rows()) != k || static_cast<std::size_t>(factor.cols()) != k) {
        throw DomainError("latent: correlation factor must be K x K");
    }
    double total = 0.0;
    for (double p : powers) {
        if (!(p > 0.0)) throw DomainError("latent: powers must be positive");
        total += p;
    }
    if (std::abs(total - 1.0) > 1e-9) throw DomainError("latent: powers must sum to 1");
    for (std::size_t i = 0; i < k; ++i) {
        if (factor(i, i) != cdouble(1.0, 0.0)) throw DomainError("latent: factor must be unitriangular");
        for (std::size_t j = i + 1; j < k; ++j) {
            if (factor(i, j) != cdouble(0.0, 0.0)) throw DomainError("latent: factor must be lower triangular");
        }
    }
    if (!(noise_variance > 0.0) || !std::isfinite(noise_variance)) {
        throw DomainError("latent: noise variance must be positive");
    }
}

void ScenarioConfig::validate() const {
    if (sources == 0) throw DomainError("scenario: sources must be >= 1");
    if (snapshots == 0) throw DomainError("scenario: snapshots must be >= 1");
    if (!(rho >= 0.0 && rho <= 1.0)) throw DomainError("scenario: rho must lie in [0, 1]");
    if (!(snr_min_db <= snr_max_db)) throw DomainError("scenario: snr_min_db must not exceed snr_max_db");
    if (!(power_min_db <= power_max_db)) {
        throw DomainError("scenario: power_min_db must not exceed power_max_db");
    }
    if (!std::isfinite(snr_min_db) || !std::isfinite(snr_max_db) || !std::isfinite(power_min_db) ||
        !std::isfinite(power_max_db)) {
        throw DomainError("scenario: ranges must be finite");
    }
}

double wrap_to_two_pi(double theta) {
    double t = std::fmod(theta, kTwoPi);
    if (t < 0.0) t += kTwoPi;
    if (t >= kTwoPi) t = 0.0;
    return t;
}

CVector steering_vector(const ArrayGeometry& geometry, double theta) {
    const auto m_count = static_cast<Eigen::Index>(geometry.antennas);
    const double k = kTwoPi * geometry.radius_over_wavelength;
    const double t = wrap_to_two_pi(theta);
    CVector a(m_count);
    for (Eigen::Index m = 0; m < m_count; ++m) {
        const double phase = -k * std::cos(t - kTwoPi * static_cast<double>(m) / static_cast<double>(m_count));
        a(m) = std::polar(1.0, phase);
    }
    return a;
}

CVector steering_derivative(const ArrayGeometry& geometry, double theta) {
    const auto m_count = static_cast<Eigen::Index>(geometry.antennas);
    const double k = kTwoPi * geometry.radius_over_wavelength;
    const double t = wrap_to_two_pi(theta);
    CVector d(m_count);
    for (Eigen::Index m = 0; m < m_count; ++m) {
        const double arg = t - kTwoPi * static_cast<double>(m) / static_cast<double>(m_count);
        d(m) = cdouble(0.0, k * std::sin(arg)) * std::polar(1.0, -k * std::cos(arg));
    }
    return d;
}

CMatrix steering_matrix(const ArrayGeometry& geometry, std::span<const double> angles) {
    CMatrix a(static_cast<Eigen::Index>(geometry.antennas), static_cast<Eigen::Index>(angles.size()));
    for (std::size_t k = 0; k < angles.size(); ++k) {
        a.col(static_cast<Eigen::Index>(k)) = steering_vector(geometry, angles[k]);
    }
    return a;
}

CMatrix correlation_matrix(double rho, std::size_t sources) {
    if (!(rho >= 0.0 && rho <= 1.0)) {
        std::ostringstream msg;
        msg << "correlation_matrix: rho=" << rho << " outside [0, 1]";
        throw DomainError(msg.str());
    }
    const auto k = static_cast<Eigen::Index>(sources);
    CMatrix c(k, k);
    for (Eigen::Index i = 0; i < k; ++i) {
        for (Eigen::Index j = 0; j < k; ++j) {
            c(i, j) = std::pow(rho, static_cast<double>(std::abs(i - j)));
        }
    }
    return c;
}

CMatrix signal_covariance(std::span<const double> powers, const CMatrix& factor) {
    const auto k = static_cast<Eigen::Index>(powers.size());
    if (factor.rows() != k || factor.cols() != k) {
        throw DomainError("signal_covariance: factor must be K x K");
    }
    RVector root(k);
    for (Eigen::Index i = 0; i < k; ++i) root(i) = std::sqrt(powers[static_cast<std::size_t>(i)]);
    const CMatrix g = root.asDiagonal() * factor;
    return hermitian_part(g * g.adjoint());
}

CMatrix model_covariance(const ArrayGeometry& geometry, std::span<const double> angles,
                         const CMatrix& signal_cov, double noise_variance) {
    const CMatrix a = steering_matrix(geometry, angles);
    CMatrix c = a * signal_cov * a.adjoint();
    c.diagonal().array() += noise_variance;
    return hermitian_part(c);
}

CMatrix model_covariance(const ArrayGeometry& geometry, const LatentParams& latent) {
    return model_covariance(geometry, latent.angles, signal_covariance(latent.powers, latent.factor),
                            latent.noise_variance);
}

CMatrix sample_covariance(const CMatrix& snapshots) {
    const double n = static_cast<double>(snapshots.cols());
    return hermitian_part(snapshots * snapshots.adjoint() / n);
}

SnapshotBatch sample_snapshots(const ArrayGeometry& geometry, const Scenario& scenario,
                               std::size_t count, Rng& rng) {
    if (count == 0) throw DomainError("sample_snapshots: need at least one snapshot");
    const auto m = static_cast<Eigen::Index>(geometry.antennas);
    const auto k = static_cast<Eigen::Index>(scenario.sources());
    const CMatrix a = steering_matrix(geometry, scenario.angles);
    const CMatrix mixing = psd_sqrt(signal_covariance(scenario.powers, scenario.factor));
    const double noise_scale = std::sqrt(scenario.noise_variance);

    CMatrix w(k, static_cast<Eigen::Index>(count));
    CMatrix noise(m, static_cast<Eigen::Index>(count));
    for (Eigen::Index t = 0; t < static_cast<Eigen::Index>(count); ++t) {
        for (Eigen::Index i = 0; i < k; ++i) w(i, t) = complex_normal(rng);
        for (Eigen::Index i = 0; i < m; ++i) noise(i, t) = noise_scale * complex_normal(rng);
    }
    SnapshotBatch batch;
    batch.snapshots = a * (mixing * w) + noise;
    batch.sample_covariance = sample_covariance(batch.snapshots);
    return batch;
}

Scenario draw_scenario(const ScenarioConfig& config, Rng& rng) {
    config.validate();
    const std::size_t k = config.sources;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

    Scenario s;
    s.angles.resize(k);
    for (auto& theta : s.angles) theta = wrap_to_two_pi(kTwoPi * unit(rng));

    s.powers.resize(k);
    for (auto& p : s.powers) p = std::pow(10.0, uniform(config.power_min_db, config.power_max_db) / 10.0);
    const double total = std::accumulate(s.powers.begin(), s.powers.end(), 0.0);
    for (auto& p : s.powers) p /= total;

    const double snr_db = uniform(config.snr_min_db, config.snr_max_db);
    s.noise_variance = std::pow(10.0, -snr_db / 10.0);

    switch (config.correlation) {
        case CorrelationMode::uncorrelated: s.correlation = 0.0; break;
        case CorrelationMode::fixed: s.correlation = config.rho; break;
        case CorrelationMode::uniform: s.correlation = unit(rng); break;
    }
    const auto kk = static_cast<Eigen::Index>(k);
    if (s.correlation == 0.0) {
        s.factor = CMatrix::Identity(kk, kk);
    } else {
        const CMatrix c_rho = correlation_matrix(s.correlation, k);
        if (s.correlation < 1.0) {
            try {
                s.factor = cholesky(c_rho);
            } catch (const NotPositiveDefinite&) {
                s.factor = psd_sqrt(c_rho);  // numerically singular near rho = 1
            }
        } else {
            s.factor = psd_sqrt(c_rho);
        }
    }
    return s;
}

}  // namespace mbdoa
