#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mbdoa/array_model.hpp"
#include "mbdoa/errors.hpp"
#include "mbdoa/heads.hpp"
#include "mbdoa/objective.hpp"
#include "support.hpp"

using namespace mbdoa;
using mbdoa::test::rel_norm;

namespace {

const ArrayGeometry kGeo{};

LatentParams random_latent(Rng& rng, std::size_t k, CovarianceMode mode, double spread = 1.0) {
    const HeadLayout layout{k, mode};
    std::normal_distribution<double> normal(0.0, spread);
    std::vector<double> raw(layout.size());
    for (double& v : raw) v = normal(rng);
    return apply_heads(layout, raw);
}

CMatrix random_sample_cov(Rng& rng, std::size_t k = 3, std::size_t n = 100) {
    ScenarioConfig cfg;
    cfg.sources = k;
    cfg.correlation = CorrelationMode::uniform;
    const Scenario s = draw_scenario(cfg, rng);
    return sample_snapshots(kGeo, s, n, rng).sample_covariance;
}

// Literal re-implementation: log-det from eigenvalues and an explicit inverse.
double sml_oracle(const LatentParams& p, const CMatrix& c_hat) {
    const CMatrix a = steering_matrix(kGeo, p.angles);
    RVector sq(static_cast<Eigen::Index>(p.powers.size()));
    for (std::size_t i = 0; i < p.powers.size(); ++i) sq(static_cast<Eigen::Index>(i)) = std::sqrt(p.powers[i]);
    const CMatrix d = sq.cast<cdouble>().asDiagonal();
    const CMatrix cs = d * p.factor * p.factor.adjoint() * d;
    CMatrix cy = a * cs * a.adjoint();
    cy += p.noise_variance * CMatrix::Identity(cy.rows(), cy.cols());
    const CMatrix herm = (cy + cy.adjoint()) / 2.0;
    const double logdet = Eigen::SelfAdjointEigenSolver<CMatrix>(herm).eigenvalues().array().log().sum();
    return logdet + (herm.inverse() * c_hat).trace().real();
}

}  // namespace

TEST_CASE("sml loss with identity model and sample covariance is M") {
    CHECK(sml_loss(CMatrix::Identity(9, 9), CMatrix::Identity(9, 9)) == doctest::Approx(9.0));
}

TEST_CASE("sml loss at an exact match is ln det C + M") {
    Rng rng = make_stream(51);
    const LatentParams p = random_latent(rng, 3, CovarianceMode::full);
    const CMatrix cy = model_covariance(kGeo, p);
    CHECK(sml_loss(kGeo, p, cy) == doctest::Approx(logdet_hermitian(cy) + 9.0).epsilon(1e-12));
}

TEST_CASE("the exact match minimises sml loss over the scaled family") {
    Rng rng = make_stream(52);
    const LatentParams p = random_latent(rng, 3, CovarianceMode::diag);
    const CMatrix cy = model_covariance(kGeo, p);
    const double at_match = sml_loss(cy, cy);
    for (double s : {0.5, 0.9, 1.1, 2.0}) CHECK(sml_loss(cy * s, cy) > at_match);
}

TEST_CASE("sml loss matches an independent implementation") {
    for (std::size_t trial = 0; trial < 100; ++trial) {
        Rng rng = make_stream(53, trial);
        const LatentParams p = random_latent(rng, 1 + trial % 4, CovarianceMode::full);
        const CMatrix c_hat = random_sample_cov(rng, 3, 5 + trial);
        const double oracle = sml_oracle(p, c_hat);
        CHECK(std::abs(sml_loss(kGeo, p, c_hat) - oracle) <= 1e-10 * std::max(1.0, std::abs(oracle)));
    }
}

TEST_CASE("sml loss rejects non-positive noise") {
    Rng rng = make_stream(54);
    LatentParams p = random_latent(rng, 3, CovarianceMode::diag);
    p.noise_variance = 0.0;
    CHECK_THROWS_AS(sml_loss(kGeo, p, CMatrix::Identity(9, 9)), DomainError);
}

TEST_CASE("sml loss is invariant under a joint permutation of sources") {
    for (std::size_t trial = 0; trial < 100; ++trial) {
        Rng rng = make_stream(55, trial);
        const LatentParams p = random_latent(rng, 3, CovarianceMode::full);
        const CMatrix c_hat = random_sample_cov(rng);
        const CMatrix cs = signal_covariance(p.powers, p.factor);
        std::vector<int> perm{0, 1, 2};
        std::shuffle(perm.begin(), perm.end(), rng);
        Eigen::PermutationMatrix<3> pm;
        for (int i = 0; i < 3; ++i) pm.indices()(i) = perm[static_cast<std::size_t>(i)];
        std::vector<double> angles(3);
        for (int i = 0; i < 3; ++i) angles[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])] = p.angles[static_cast<std::size_t>(i)];
        const CMatrix cs_perm = pm * cs * pm.transpose();
        const double base = sml_loss(kGeo, p, c_hat);
        const double moved = sml_loss(model_covariance(kGeo, angles, cs_perm, p.noise_variance), c_hat);
        CHECK(moved == doctest::Approx(base).epsilon(1e-10));

        LatentParams d = random_latent(rng, 3, CovarianceMode::diag);
        LatentParams e = d;
        std::swap(e.angles[0], e.angles[2]);
        std::swap(e.powers[0], e.powers[2]);
        CHECK(sml_loss(kGeo, e, c_hat) == doctest::Approx(sml_loss(kGeo, d, c_hat)).epsilon(1e-10));
    }
}

TEST_CASE("sml loss is consistent: truth beats 0.1 rad perturbations with many snapshots") {
    int wins = 0;
    for (std::size_t trial = 0; trial < 100; ++trial) {
        Rng rng = make_stream(56, trial);
        ScenarioConfig cfg;
        const Scenario s = draw_scenario(cfg, rng);
        const CMatrix c_hat = sample_snapshots(kGeo, s, 100000, rng).sample_covariance;
        LatentParams truth{s.angles, s.powers, CMatrix::Identity(3, 3), s.noise_variance};
        const double base = sml_loss(kGeo, truth, c_hat);
        bool all = true;
        for (std::size_t k = 0; k < 3; ++k) {
            for (double delta : {-0.1, 0.1}) {
                LatentParams q = truth;
                q.angles[k] = wrap_to_two_pi(q.angles[k] + delta);
                all = all && base < sml_loss(kGeo, q, c_hat);
            }
        }
        wins += all ? 1 : 0;
    }
    CHECK(wins >= 95);
}

TEST_CASE("covariance matching loss examples") {
    Rng rng = make_stream(57);
    const LatentParams p = random_latent(rng, 3, CovarianceMode::full);
    const CMatrix a = steering_matrix(kGeo, p.angles);
    const CMatrix fit = a * signal_covariance(p.powers, p.factor) * a.adjoint();
    CHECK(covmatch_loss(kGeo, p, fit) == doctest::Approx(0.0).scale(1.0));
    const double s2 = 0.3;
    const CMatrix noisy = fit + s2 * CMatrix::Identity(9, 9);
    CHECK(covmatch_loss(kGeo, p, noisy) == doctest::Approx(9.0 * s2 * s2).epsilon(1e-10));
    for (std::size_t trial = 0; trial < 100; ++trial) {
        Rng r = make_stream(58, trial);
        CHECK(covmatch_loss(kGeo, random_latent(r, 3, CovarianceMode::full), random_sample_cov(r)) >= 0.0);
    }
}

TEST_CASE("gradient dimension matches the head layout") {
    Rng rng = make_stream(59);
    for (std::size_t k = 1; k <= 5; ++k) {
        const LatentParams p = random_latent(rng, k, CovarianceMode::full);
        const CMatrix c_hat = random_sample_cov(rng, 2);
        const LatentGradient g = sml_loss_grad(kGeo, p, c_hat);
        CHECK(g.dimension() == k + k + k * (k - 1) + 1);
        CHECK(g.flatten().size() == HeadLayout{k, CovarianceMode::full}.size());
        CHECK(sml_loss_grad(kGeo, p, c_hat, CovarianceMode::diag).dimension() == 2 * k + 1);
    }
}

TEST_CASE("analytic gradients match central differences on 100 random points") {
    for (LossKind kind : {LossKind::sml, LossKind::covmatch}) {
        double worst = 0.0;
        for (std::size_t trial = 0; trial < 100; ++trial) {
            Rng rng = make_stream(60, trial);
            const CovarianceMode mode = trial % 2 ? CovarianceMode::full : CovarianceMode::diag;
            const LatentParams p = random_latent(rng, 3, mode);
            const CMatrix c_hat = random_sample_cov(rng);
            const auto g = loss_and_grad(kind, kGeo, p, c_hat, mode).gradient.flatten();
            const auto f = finite_diff_grad(kind, kGeo, p, c_hat, 1e-5, mode).flatten();
            worst = std::max(worst, rel_norm(g, f));
        }
        CHECK(worst < 1e-4);
    }
}

TEST_CASE("separate gradient entry points agree with loss_and_grad") {
    Rng rng = make_stream(61);
    const LatentParams p = random_latent(rng, 3, CovarianceMode::full);
    const CMatrix c_hat = random_sample_cov(rng);
    const auto lg = loss_and_grad(LossKind::sml, kGeo, p, c_hat, CovarianceMode::full);
    CHECK(lg.loss == doctest::Approx(sml_loss(kGeo, p, c_hat)));
    CHECK(rel_norm(sml_loss_grad(kGeo, p, c_hat).flatten(), lg.gradient.flatten()) < 1e-14);
    const auto lc = loss_and_grad(LossKind::covmatch, kGeo, p, c_hat, CovarianceMode::full);
    CHECK(lc.loss == doctest::Approx(covmatch_loss(kGeo, p, c_hat)));
    CHECK(rel_norm(covmatch_loss_grad(kGeo, p, c_hat).flatten(), lc.gradient.flatten()) < 1e-14);
    CHECK(lc.gradient.log_noise == 0.0);
}

TEST_CASE("symmetric two-source configuration gives mirrored angle gradients") {
    const double delta = 0.6;
    const double eps = 0.45;
    Scenario s;
    s.angles = {delta, kTwoPi - delta};
    s.powers = {0.5, 0.5};
    s.factor = CMatrix::Identity(2, 2);
    const CMatrix c_hat = model_covariance(kGeo, s.angles, signal_covariance(s.powers, s.factor), 0.1);
    LatentParams p{{eps, kTwoPi - eps}, {0.5, 0.5}, CMatrix::Identity(2, 2), 0.2};
    for (LossKind kind : {LossKind::sml, LossKind::covmatch}) {
        const LatentGradient g = loss_and_grad(kind, kGeo, p, c_hat, CovarianceMode::diag).gradient;
        CHECK(std::abs(g.angles[0]) > 1e-6);
        CHECK(g.angles[0] == doctest::Approx(-g.angles[1]).epsilon(1e-9));
    }
}

TEST_CASE("covariance matching gradient vanishes at a perfect fit") {
    Rng rng = make_stream(62);
    const LatentParams p = random_latent(rng, 3, CovarianceMode::full);
    const CMatrix a = steering_matrix(kGeo, p.angles);
    const CMatrix fit = a * signal_covariance(p.powers, p.factor) * a.adjoint();
    for (double v : covmatch_loss_grad(kGeo, p, fit).flatten()) CHECK(std::abs(v) < 1e-10);
}

TEST_CASE("covariance matching gradient at a doubled sample covariance still matches differences") {
    for (std::size_t trial = 0; trial < 20; ++trial) {
        Rng rng = make_stream(63, trial);
        const LatentParams p = random_latent(rng, 3, CovarianceMode::full);
        const CMatrix c_hat = random_sample_cov(rng);
        const auto g1 = covmatch_loss_grad(kGeo, p, c_hat).flatten();
        const auto g2 = covmatch_loss_grad(kGeo, p, 2.0 * c_hat).flatten();
        const auto f2 = finite_diff_grad(LossKind::covmatch, kGeo, p, 2.0 * c_hat, 1e-5).flatten();
        CHECK(rel_norm(g2, f2) < 1e-4);
        // The residual R = C_hat - P enters linearly: grad(2C) - grad(C) is the C_hat term alone.
        const auto g0 = covmatch_loss_grad(kGeo, p, CMatrix::Zero(9, 9)).flatten();
        std::vector<double> predicted(g1.size());
        for (std::size_t i = 0; i < g1.size(); ++i) predicted[i] = 2.0 * g1[i] - g0[i];
        CHECK(rel_norm(g2, predicted) < 1e-9);
    }
}

TEST_CASE("sml gradient vanishes at a local minimum reached by descent") {
    Rng rng = make_stream(64);
    ScenarioConfig cfg;
    cfg.snr_min_db = cfg.snr_max_db = 10.0;
    const Scenario s = draw_scenario(cfg, rng);
    const CMatrix c_hat = sample_snapshots(kGeo, s, 1000, rng).sample_covariance;
    const HeadLayout layout{3, CovarianceMode::diag};
    LatentParams start{s.angles, s.powers, CMatrix::Identity(3, 3), s.noise_variance};
    std::vector<double> x = invert_heads(layout, start);
    const auto grad_at = [&](const std::vector<double>& v) {
        return loss_and_grad(LossKind::sml, kGeo, apply_heads(layout, v), c_hat, CovarianceMode::diag).gradient.flatten();
    };
    const auto loss_at = [&](const std::vector<double>& v) { return sml_loss(kGeo, apply_heads(layout, v), c_hat); };
    const auto n = static_cast<Eigen::Index>(x.size());
    double norm = INFINITY;
    for (int it = 0; it < 100 && norm >= 1e-6; ++it) {
        const std::vector<double> g = grad_at(x);
        const Eigen::Map<const Eigen::VectorXd> gv(g.data(), n);
        norm = gv.norm();
        Eigen::MatrixXd h(n, n);
        for (Eigen::Index j = 0; j < n; ++j) {
            std::vector<double> xp = x;
            std::vector<double> xm = x;
            xp[static_cast<std::size_t>(j)] += 1e-5;
            xm[static_cast<std::size_t>(j)] -= 1e-5;
            const std::vector<double> gp = grad_at(xp);
            const std::vector<double> gm = grad_at(xm);
            for (Eigen::Index i = 0; i < n; ++i)
                h(i, j) = (gp[static_cast<std::size_t>(i)] - gm[static_cast<std::size_t>(i)]) / 2e-5;
        }
        h = 0.5 * (h + h.transpose()).eval();
        // Softmax leaves one direction flat; the damping keeps the system solvable.
        const double lambda = 1e-8 + norm;
        const Eigen::VectorXd dir = -(h + lambda * Eigen::MatrixXd::Identity(n, n)).ldlt().solve(gv);
        const double base = loss_at(x);
        double step = 1.0;
        for (; step > 1e-12; step *= 0.5) {
            std::vector<double> y = x;
            for (Eigen::Index i = 0; i < n; ++i) y[static_cast<std::size_t>(i)] += step * dir(i);
            if (loss_at(y) <= base + 1e-4 * step * gv.dot(dir) && gv.dot(dir) < 0.0) {
                x = y;
                break;
            }
        }
        if (step <= 1e-12) {
            for (std::size_t i = 0; i < x.size(); ++i) x[i] -= 1e-3 * g[i];
        }
    }
    CHECK(norm < 1e-6);
}

TEST_CASE("finite_diff is exact on a quadratic") {
    const auto f = [](std::span<const double> x) { return 3.0 * x[0] * x[0] - 2.0 * x[0] * x[1] + 0.5 * x[1] * x[1] + x[0]; };
    const std::vector<double> x{0.7, -1.3};
    const auto g = finite_diff(f, x, 1e-3);
    CHECK(g[0] == doctest::Approx(6.0 * 0.7 + 2.6 + 1.0).epsilon(1e-9));
    CHECK(g[1] == doctest::Approx(-1.4 - 1.3).epsilon(1e-9));
}

TEST_CASE("finite_diff step bounds") {
    const auto f = [](std::span<const double> x) { return x[0]; };
    const std::vector<double> x{1.0};
    CHECK_THROWS_AS(finite_diff(f, x, 1e-9), DomainError);
    CHECK_THROWS_AS(finite_diff(f, x, 1e-2), DomainError);
    CHECK_NOTHROW(finite_diff(f, x, 1e-8));
}

TEST_CASE("shrinking the difference step reduces disagreement with the analytic gradient") {
    int improved = 0;
    for (std::size_t trial = 0; trial < 20; ++trial) {
        Rng rng = make_stream(65, trial);
        const LatentParams p = random_latent(rng, 3, CovarianceMode::full);
        const CMatrix c_hat = random_sample_cov(rng);
        const auto g = sml_loss_grad(kGeo, p, c_hat).flatten();
        const double coarse = rel_norm(finite_diff_grad(LossKind::sml, kGeo, p, c_hat, 1e-4).flatten(), g);
        const double fine = rel_norm(finite_diff_grad(LossKind::sml, kGeo, p, c_hat, 1e-6).flatten(), g);
        improved += fine < coarse ? 1 : 0;
    }
    CHECK(improved >= 19);
}
