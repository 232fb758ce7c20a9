#include "mbdoa/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "mbdoa/errors.hpp"
#include "mbdoa/heads.hpp"
#include "mbdoa/objective.hpp"

namespace mbdoa {

AngularGrid AngularGrid::uniform(const ArrayGeometry& geometry, std::size_t size) {
    geometry.validate();
    if (size < 3) throw DomainError("angular grid: need at least 3 points");
    AngularGrid grid;
    grid.points.resize(size);
    for (std::size_t g = 0; g < size; ++g) grid.points[g] = kTwoPi * static_cast<double>(g) / static_cast<double>(size);
    grid.steering = steering_matrix(geometry, grid.points);
    return grid;
}

std::vector<std::size_t> pick_peaks(const std::vector<double>& spectrum, std::size_t count) {
    const std::size_t n = spectrum.size();
    if (count > n) throw DomainError("pick_peaks: more peaks requested than grid points");
    std::vector<std::size_t> maxima;
    for (std::size_t i = 0; i < n; ++i) {
        const double left = spectrum[(i + n - 1) % n];
        const double right = spectrum[(i + 1) % n];
        if (spectrum[i] > left && spectrum[i] > right) maxima.push_back(i);
    }
    auto by_value = [&](std::size_t a, std::size_t b) {
        return spectrum[a] > spectrum[b] || (spectrum[a] == spectrum[b] && a < b);
    };
    std::sort(maxima.begin(), maxima.end(), by_value);
    if (maxima.size() > count) maxima.resize(count);
    if (maxima.size() < count) {
        std::vector<std::size_t> rest;
        rest.reserve(n);
        for (std::size_t i = 0; i < n; ++i) {
            if (std::find(maxima.begin(), maxima.end(), i) == maxima.end()) rest.push_back(i);
        }
        std::partial_sort(rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(count - maxima.size()), rest.end(),
                          by_value);
        maxima.insert(maxima.end(), rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(count - maxima.size()));
    }
    return maxima;
}

namespace {

void require_grid_match(const CMatrix& sample_cov, const AngularGrid& grid) {
    if (sample_cov.rows() != sample_cov.cols() || sample_cov.rows() != grid.steering.rows()) {
        throw ConfigError("estimator: sample covariance does not match the grid's array size");
    }
}

std::vector<double> angles_at(const AngularGrid& grid, const std::vector<std::size_t>& idx) {
    std::vector<double> angles;
    angles.reserve(idx.size());
    for (std::size_t i : idx) angles.push_back(grid.points[i]);
    return angles;
}

}  // namespace

DoAEstimate music_estimate(const CMatrix& sample_cov, const AngularGrid& grid, std::size_t sources) {
    require_grid_match(sample_cov, grid);
    const auto m = static_cast<std::size_t>(sample_cov.rows());
    if (sources == 0 || sources >= m) {
        std::ostringstream msg;
        msg << "music_estimate: need 1 <= K < M, got K=" << sources << ", M=" << m;
        throw DomainError(msg.str());
    }
    const HermitianEigen eig = hermitian_eig(sample_cov);
    const Eigen::Index noise_dim = static_cast<Eigen::Index>(m - sources);
    const CMatrix noise = eig.vectors.leftCols(noise_dim);
    const CMatrix proj = noise.adjoint() * grid.steering;  // (M-K) x G

    DoAEstimate est;
    auto& spectrum = est.diagnostics.spectrum;
    spectrum.resize(grid.size());
    for (std::size_t g = 0; g < grid.size(); ++g) {
        spectrum[g] = 1.0 / proj.col(static_cast<Eigen::Index>(g)).squaredNorm();
    }
    est.diagnostics.peak_indices = pick_peaks(spectrum, sources);
    est.angles = angles_at(grid, est.diagnostics.peak_indices);
    return est;
}

namespace {

// SPICE state for one covariance: Gamma (the matrix whose R^{-1}-weighted norm
// is minimised) and the atom weights of the linear constraint sum w_k p_k = 1.
struct SpiceProblem {
    CMatrix gamma;
    std::vector<double> weights;  // G grid atoms then M noise atoms
    bool full_rank = false;
};

SpiceProblem spice_problem(const CMatrix& sample_cov, const AngularGrid& grid) {
    const Eigen::Index m = sample_cov.rows();
    const std::size_t g_count = grid.size();
    const HermitianEigen eig = hermitian_eig(sample_cov);
    const double top = eig.values.maxCoeff();
    SpiceProblem prob;
    prob.full_rank = eig.values.minCoeff() > 1e-10 * top;
    prob.weights.resize(g_count + static_cast<std::size_t>(m));
    if (prob.full_rank) {
        // f = ||R^{-1/2} (R_hat - R) R_hat^{-1/2}||^2: Gamma = R_hat^{1/2}, w_k = a_k^H R_hat^{-1} a_k
        prob.gamma = psd_sqrt(sample_cov);
        const CMatrix l = cholesky(sample_cov);
        const CMatrix inv_a = cholesky_solve(l, grid.steering);
        for (std::size_t g = 0; g < g_count; ++g) {
            const auto gi = static_cast<Eigen::Index>(g);
            prob.weights[g] = grid.steering.col(gi).dot(inv_a.col(gi)).real();
        }
        const CMatrix inv = cholesky_solve(l, CMatrix::Identity(m, m));
        for (Eigen::Index i = 0; i < m; ++i) prob.weights[g_count + static_cast<std::size_t>(i)] = inv(i, i).real();
    } else {
        // f = ||R^{-1/2} (R_hat - R)||^2: Gamma = R_hat, w_k = ||a_k||^2 / tr(R_hat)
        prob.gamma = sample_cov;
        const double tr = sample_cov.trace().real();
        for (std::size_t g = 0; g < g_count; ++g) {
            prob.weights[g] = grid.steering.col(static_cast<Eigen::Index>(g)).squaredNorm() / tr;
        }
        for (Eigen::Index i = 0; i < m; ++i) prob.weights[g_count + static_cast<std::size_t>(i)] = 1.0 / tr;
    }
    return prob;
}

CMatrix spice_model(const AngularGrid& grid, const std::vector<double>& powers) {
    const std::size_t g_count = grid.size();
    const Eigen::Index m = grid.steering.rows();
    RVector pg(static_cast<Eigen::Index>(g_count));
    for (std::size_t g = 0; g < g_count; ++g) pg(static_cast<Eigen::Index>(g)) = powers[g];
    CMatrix r = grid.steering * pg.asDiagonal() * grid.steering.adjoint();
    for (Eigen::Index i = 0; i < m; ++i) r(i, i) += powers[g_count + static_cast<std::size_t>(i)];
    return hermitian_part(r);
}

double spice_criterion_for(const SpiceProblem& prob, const AngularGrid& grid, const std::vector<double>& powers) {
    const CMatrix r = spice_model(grid, powers);
    return (prob.gamma.adjoint() * solve_hermitian(r, prob.gamma)).trace().real();
}

}  // namespace

double spice_criterion(const CMatrix& sample_cov, const AngularGrid& grid, const std::vector<double>& powers) {
    require_grid_match(sample_cov, grid);
    return spice_criterion_for(spice_problem(sample_cov, grid), grid, powers);
}

DoAEstimate spice_estimate(const CMatrix& sample_cov, const AngularGrid& grid, std::size_t sources,
                           const SpiceOptions& options) {
    require_grid_match(sample_cov, grid);
    const double trace = sample_cov.trace().real();
    if (!(trace > 0.0)) throw DomainError("spice_estimate: sample covariance has zero trace");
    const auto m = static_cast<std::size_t>(sample_cov.rows());
    if (sources == 0 || sources > grid.size()) throw DomainError("spice_estimate: invalid source count");
    const std::size_t g_count = grid.size();
    const std::size_t atoms = g_count + m;
    const SpiceProblem prob = spice_problem(sample_cov, grid);

    // Periodogram start, scaled onto the constraint.
    std::vector<double> p(atoms);
    const CMatrix ra = sample_cov * grid.steering;
    for (std::size_t g = 0; g < g_count; ++g) {
        const auto gi = static_cast<Eigen::Index>(g);
        const double norm2 = grid.steering.col(gi).squaredNorm();
        p[g] = std::max(grid.steering.col(gi).dot(ra.col(gi)).real(), 0.0) / (norm2 * norm2);
    }
    for (std::size_t i = 0; i < m; ++i) {
        p[g_count + i] = sample_cov(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)).real();
    }
    double constraint = 0.0;
    for (std::size_t k = 0; k < atoms; ++k) constraint += prob.weights[k] * p[k];
    for (double& v : p) v /= constraint;

    std::vector<double> root_w(atoms);
    for (std::size_t k = 0; k < atoms; ++k) root_w[k] = std::sqrt(prob.weights[k]);

    DoAEstimate est;
    std::vector<double> norms(atoms);
    std::size_t iter = 0;
    for (; iter < options.max_iterations; ++iter) {
        CMatrix z;
        try {
            z = solve_hermitian(spice_model(grid, p), prob.gamma);  // R^{-1} Gamma
        } catch (const NotPositiveDefinite&) {
            est.diagnostics.warnings.emplace_back("spice: model covariance became singular");
            break;
        }
        const CMatrix za = z.adjoint() * grid.steering;  // column g: Z^H a_g
        for (std::size_t g = 0; g < g_count; ++g) norms[g] = za.col(static_cast<Eigen::Index>(g)).norm();
        for (std::size_t i = 0; i < m; ++i) norms[g_count + i] = z.row(static_cast<Eigen::Index>(i)).norm();
        double rho = 0.0;
        for (std::size_t k = 0; k < atoms; ++k) rho += root_w[k] * p[k] * norms[k];
        double max_change = 0.0;
        double max_power = 0.0;
        for (std::size_t k = 0; k < atoms; ++k) {
            const double updated = p[k] * norms[k] / (root_w[k] * rho);
            max_change = std::max(max_change, std::abs(updated - p[k]));
            max_power = std::max(max_power, updated);
            p[k] = updated;
        }
        if (max_change <= options.tolerance * max_power) {
            ++iter;
            break;
        }
    }

    // Undo the constraint normalisation to land on the unconstrained optimum's scale.
    const double crit = spice_criterion_for(prob, grid, p);
    const double scale = prob.full_rank ? std::sqrt(crit) : std::sqrt(crit / trace);
    for (double& v : p) v *= scale;

    est.diagnostics.iterations = iter;
    est.diagnostics.final_loss = crit;
    est.diagnostics.spectrum.assign(p.begin(), p.begin() + static_cast<std::ptrdiff_t>(g_count));
    est.diagnostics.noise_powers.assign(p.begin() + static_cast<std::ptrdiff_t>(g_count), p.end());
    est.diagnostics.peak_indices = pick_peaks(est.diagnostics.spectrum, sources);
    est.angles = angles_at(grid, est.diagnostics.peak_indices);
    return est;
}

RefineResult ml_refine(const ArrayGeometry& geometry, const LatentParams& start, const CMatrix& sample_cov,
                       const RefineOptions& options) {
    const HeadLayout layout{start.sources(), options.mode};
    RefineResult result;
    result.latent = start;
    LossAndGradient current = loss_and_grad(LossKind::sml, geometry, start, sample_cov, options.mode);
    result.initial_loss = current.loss;
    result.final_loss = current.loss;
    if (options.steps == 0) return result;
    if (!std::isfinite(current.loss)) {
        result.non_finite = true;
        return result;
    }

    std::vector<double> raw = invert_heads(layout, start);
    const std::size_t k = layout.sources;
    for (std::size_t step = 0; step < options.steps; ++step) {
        const std::vector<double> g = current.gradient.flatten();
        const std::size_t block = options.block ? step % 3 : 3;
        for (std::size_t i = 0; i < raw.size(); ++i) {
            const bool is_angle = i < k;
            const bool is_noise = i == layout.noise_offset();
            const bool active = block == 3 || (block == 0 && is_angle) || (block == 2 && is_noise) ||
                                (block == 1 && !is_angle && !is_noise);
            if (active) raw[i] -= options.step_size * g[i];
        }
        const LatentParams next = apply_heads(layout, raw);
        try {
            current = loss_and_grad(LossKind::sml, geometry, next, sample_cov, options.mode);
        } catch (const std::exception&) {
            current.loss = NAN;
        }
        if (!std::isfinite(current.loss)) {
            result.non_finite = true;
            break;
        }
        if (current.loss < result.final_loss) {
            result.final_loss = current.loss;
            result.latent = next;
            ++result.improvements;
        }
    }
    return result;
}

DoAEstimate mbd_estimate(const EncoderModel& model, const SnapshotBatch& batch) {
    const EncoderOutput fwd = encoder_forward(model, batch.sample_covariance);
    DoAEstimate est;
    est.angles = fwd.latent.angles;
    est.diagnostics.signal_covariance = signal_covariance(fwd.latent.powers, fwd.latent.factor);
    est.diagnostics.latent = fwd.latent;
    return est;
}

MusicEstimator::MusicEstimator(std::shared_ptr<const AngularGrid> grid, std::string name)
    : grid_(std::move(grid)), name_(std::move(name)) {}

DoAEstimate MusicEstimator::estimate(const TrialContext& trial) const {
    return music_estimate(trial.batch.sample_covariance, *grid_, trial.sources);
}

SpiceEstimator::SpiceEstimator(std::shared_ptr<const AngularGrid> grid, SpiceOptions options, std::string name)
    : grid_(std::move(grid)), options_(options), name_(std::move(name)) {}

DoAEstimate SpiceEstimator::estimate(const TrialContext& trial) const {
    return spice_estimate(trial.batch.sample_covariance, *grid_, trial.sources, options_);
}

MbdEstimator::MbdEstimator(std::shared_ptr<const EncoderModel> model, ArrayGeometry geometry, std::string name,
                           RefineOptions refine)
    : model_(std::move(model)), geometry_(geometry), name_(std::move(name)), refine_(refine) {
    refine_.mode = model_->architecture().mode;
    if (model_->architecture().input_side != geometry_.antennas) {
        throw ConfigError("estimator " + name_ + ": model input side does not match the array size");
    }
}

DoAEstimate MbdEstimator::estimate(const TrialContext& trial) const {
    if (trial.sources != model_->architecture().sources) {
        throw ConfigError("estimator " + name_ + ": model was trained for a different source count");
    }
    DoAEstimate est = mbd_estimate(*model_, trial.batch);
    if (refine_.steps > 0) {
        const RefineResult r = ml_refine(geometry_, *est.diagnostics.latent, trial.batch.sample_covariance, refine_);
        est.angles = r.latent.angles;
        est.diagnostics.initial_loss = r.initial_loss;
        est.diagnostics.final_loss = r.final_loss;
        est.diagnostics.iterations = refine_.steps;
        if (r.non_finite) est.diagnostics.warnings.emplace_back("ml_refine: non-finite loss, kept best iterate");
        est.diagnostics.signal_covariance = signal_covariance(r.latent.powers, r.latent.factor);
        est.diagnostics.latent = r.latent;
    }
    return est;
}

}  // namespace mbdoa
