#include "selftest.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <random>

#include "mbdoa/array_model.hpp"
#include "mbdoa/encoder.hpp"
#include "mbdoa/estimators.hpp"
#include "mbdoa/evaluation.hpp"
#include "mbdoa/heads.hpp"
#include "mbdoa/linalg.hpp"
#include "mbdoa/objective.hpp"

namespace mbdoa::cli {

namespace {

double relative_error(const std::vector<double>& a, const std::vector<double>& b) {
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        num += (a[i] - b[i]) * (a[i] - b[i]);
        den += b[i] * b[i];
    }
    return std::sqrt(num) / std::max(std::sqrt(den), 1e-300);
}

void record(CheckResult& r, double err) {
    ++r.cases;
    r.worst = std::max(r.worst, err);
    if (!(err <= r.tolerance)) ++r.failures;
}

SnapshotBatch random_batch(const ArrayGeometry& geo, std::size_t sources, std::size_t snapshots, Rng& rng) {
    ScenarioConfig sc;
    sc.sources = sources;
    sc.correlation = CorrelationMode::uniform;
    const Scenario truth = draw_scenario(sc, rng);
    return sample_snapshots(geo, truth, snapshots, rng);
}

}  // namespace

CheckResult check_loss_gradients(std::uint64_t seed, std::size_t cases) {
    CheckResult r{"loss gradients vs finite differences", 0, 0, 0.0, 1e-4};
    const ArrayGeometry geo;
    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::size_t i = 0; i < cases; ++i) {
        Rng rng = make_stream(seed, 1, i);
        const CovarianceMode mode = i % 2 == 0 ? CovarianceMode::diag : CovarianceMode::full;
        const HeadLayout layout{3, mode};
        std::vector<double> raw(layout.size());
        for (double& v : raw) v = normal(rng);
        const LatentParams latent = apply_heads(layout, raw);
        const SnapshotBatch batch = random_batch(geo, 3, 100, rng);
        for (LossKind kind : {LossKind::sml, LossKind::covmatch}) {
            const auto analytic = loss_and_grad(kind, geo, latent, batch.sample_covariance, mode).gradient.flatten();
            const auto numeric = finite_diff_grad(kind, geo, latent, batch.sample_covariance, 1e-5, mode).flatten();
            record(r, relative_error(analytic, numeric));
        }
    }
    return r;
}

CheckResult check_backprop(std::uint64_t seed, std::size_t points) {
    CheckResult r{"encoder backprop vs finite differences", 0, 0, 0.0, 1e-3};
    const ArrayGeometry geo;
    for (std::size_t i = 0; i < points; ++i) {
        Rng rng = make_stream(seed, 2, i);
        EncoderArchitecture arch = EncoderArchitecture::desk(2, i % 2 == 0 ? CovarianceMode::diag : CovarianceMode::full);
        arch.conv_channels = {2, 3, 4, 5};
        arch.hidden = 6;
        EncoderModel model = init_params(arch, rng);
        // Zero biases put pre-activations exactly on the ReLU kink wherever the
        // input patch is all zeros; offset them so the loss is differentiable.
        std::normal_distribution<double> jitter(0.0, 0.1);
        for (const ParamBlock& b : parameter_manifest(arch)) {
            if (b.name.ends_with(".bias")) {
                for (std::size_t j = 0; j < b.size(); ++j) model.mutable_parameters()[b.offset + j] = jitter(rng);
            }
        }
        const SnapshotBatch batch = random_batch(geo, 2, 100, rng);

        const EncoderOutput fwd = encoder_forward(model, batch.sample_covariance);
        const LossAndGradient lg = loss_and_grad(LossKind::sml, geo, fwd.latent, batch.sample_covariance, arch.mode);
        const std::vector<double> analytic = encoder_backward(model, fwd.cache, lg.gradient);

        const auto loss_at = [&](std::span<const double> params) {
            const EncoderModel probe(arch, std::vector<double>(params.begin(), params.end()));
            return sml_loss(geo, encoder_forward(probe, batch.sample_covariance).latent, batch.sample_covariance);
        };
        const std::vector<double> numeric = finite_diff(loss_at, model.parameters(), 1e-6);
        record(r, relative_error(analytic, numeric));
    }
    return r;
}

CheckResult check_steering_modulus(std::uint64_t seed, std::size_t cases) {
    CheckResult r{"steering vector entries have unit modulus", 0, 0, 0.0, 1e-12};
    Rng rng = make_stream(seed, 3);
    std::uniform_real_distribution<double> angle(-10.0, 10.0);
    std::uniform_int_distribution<std::size_t> antennas(2, 32);
    std::uniform_real_distribution<double> radius(0.05, 5.0);
    for (std::size_t i = 0; i < cases; ++i) {
        ArrayGeometry geo;
        geo.antennas = antennas(rng);
        geo.radius_over_wavelength = radius(rng);
        const CVector a = steering_vector(geo, angle(rng));
        double err = 0.0;
        for (Eigen::Index m = 0; m < a.size(); ++m) err = std::max(err, std::abs(std::abs(a(m)) - 1.0));
        record(r, err);
    }
    return r;
}

CheckResult check_head_ranges(std::uint64_t seed, std::size_t cases) {
    CheckResult r{"head outputs stay in range", 0, 0, 0.0, 0.0};
    Rng rng = make_stream(seed, 4);
    std::uniform_real_distribution<double> log_scale(-3.0, 4.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::size_t i = 0; i < cases; ++i) {
        const HeadLayout layout{1 + i % 5, i % 2 == 0 ? CovarianceMode::diag : CovarianceMode::full};
        std::vector<double> raw(layout.size());
        const double scale = std::pow(10.0, log_scale(rng));
        for (double& v : raw) v = scale * normal(rng);
        const LatentParams p = apply_heads(layout, raw);
        bool ok = std::isfinite(p.noise_variance) && p.noise_variance > 0.0;
        double sum = 0.0;
        for (double th : p.angles) ok = ok && th >= 0.0 && th < kTwoPi;
        for (double pw : p.powers) {
            ok = ok && pw > 0.0 && std::isfinite(pw);
            sum += pw;
        }
        ok = ok && std::abs(sum - 1.0) <= 1e-12;
        for (Eigen::Index k = 0; k < p.factor.rows(); ++k) ok = ok && p.factor(k, k) == cdouble(1.0, 0.0);
        record(r, ok ? 0.0 : 1.0);
    }
    return r;
}

CheckResult check_model_covariance_psd(std::uint64_t seed, std::size_t cases) {
    CheckResult r{"model covariance is Hermitian with eigenvalues >= noise variance", 0, 0, 0.0, 1e-9};
    const ArrayGeometry geo;
    std::normal_distribution<double> normal(0.0, 2.0);
    for (std::size_t i = 0; i < cases; ++i) {
        Rng rng = make_stream(seed, 5, i);
        const HeadLayout layout{1 + i % 5, CovarianceMode::full};
        std::vector<double> raw(layout.size());
        for (double& v : raw) v = normal(rng);
        const LatentParams p = apply_heads(layout, raw);
        const CMatrix c = model_covariance(geo, p);
        const double scale = std::max(1.0, c.cwiseAbs().maxCoeff());
        const double defect = hermitian_defect(c) / scale;
        const double shortfall = std::max(0.0, p.noise_variance - hermitian_eig(c).values(0)) / scale;
        record(r, std::max(defect, shortfall));
    }
    return r;
}

CheckResult check_metric_permutation(std::uint64_t seed, std::size_t cases) {
    CheckResult r{"RMSPE ignores estimate order and 2pi shifts", 0, 0, 0.0, 1e-12};
    Rng rng = make_stream(seed, 6);
    std::uniform_real_distribution<double> angle(0.0, kTwoPi);
    std::uniform_int_distribution<int> wraps(-3, 3);
    for (std::size_t i = 0; i < cases; ++i) {
        const std::size_t k = 1 + i % 4;
        std::vector<AnglePair> base(3);
        for (AnglePair& p : base) {
            for (std::size_t j = 0; j < k; ++j) {
                p.truth.push_back(angle(rng));
                p.estimate.push_back(angle(rng));
            }
        }
        std::vector<AnglePair> moved = base;
        for (AnglePair& p : moved) {
            std::shuffle(p.estimate.begin(), p.estimate.end(), rng);
            for (double& e : p.estimate) e += kTwoPi * wraps(rng);
        }
        record(r, std::abs(rmspe(base) - rmspe(moved)));
    }
    return r;
}

CheckResult check_music_scale(std::uint64_t seed, std::size_t cases) {
    CheckResult r{"MUSIC peaks are invariant to covariance scaling", 0, 0, 0.0, 0.0};
    const ArrayGeometry geo;
    const AngularGrid grid = AngularGrid::uniform(geo, 360);
    std::uniform_real_distribution<double> log_scale(-4.0, 4.0);
    for (std::size_t i = 0; i < cases; ++i) {
        Rng rng = make_stream(seed, 7, i);
        const std::size_t k = 1 + i % 4;
        const SnapshotBatch batch = random_batch(geo, k, 100, rng);
        const double c = std::pow(10.0, log_scale(rng));
        auto a = music_estimate(batch.sample_covariance, grid, k).diagnostics.peak_indices;
        auto b = music_estimate(c * batch.sample_covariance, grid, k).diagnostics.peak_indices;
        std::sort(a.begin(), a.end());
        std::sort(b.begin(), b.end());
        record(r, a == b ? 0.0 : 1.0);
    }
    return r;
}

std::vector<CheckResult> run_invariant_suites(std::uint64_t seed, std::size_t cases) {
    return {check_loss_gradients(seed, cases),       check_backprop(seed, 20),
            check_steering_modulus(seed, cases),     check_head_ranges(seed, cases),
            check_model_covariance_psd(seed, cases), check_metric_permutation(seed, cases),
            check_music_scale(seed, cases)};
}

void print_check(std::ostream& out, const CheckResult& r) {
    out << (r.passed() ? "PASS" : "FAIL") << "  " << r.name << "  cases=" << r.cases << " failures=" << r.failures
        << " worst=" << std::setprecision(3) << std::scientific << r.worst << " tol=" << r.tolerance
        << std::defaultfloat << '\n';
}

}  // namespace mbdoa::cli
