#include <doctest.h>

#include <cmath>

#include "mbdoa/array_model.hpp"
#include "mbdoa/errors.hpp"
#include "mbdoa/linalg.hpp"
#include "support.hpp"

using namespace mbdoa;
using mbdoa::test::random_pd;
using mbdoa::test::rel_frobenius;

namespace {

CMatrix reconstruct(const HermitianEigen& e) {
    return e.vectors * e.values.cast<cdouble>().asDiagonal() * e.vectors.adjoint();
}

CMatrix real_matrix(std::initializer_list<std::initializer_list<double>> rows) {
    CMatrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.begin()->size()));
    Eigen::Index i = 0;
    for (const auto& r : rows) {
        Eigen::Index j = 0;
        for (double v : r) m(i, j++) = v;
        ++i;
    }
    return m;
}

}  // namespace

TEST_CASE("hermitian_eig on identity") {
    const HermitianEigen e = hermitian_eig(CMatrix::Identity(3, 3));
    for (int i = 0; i < 3; ++i) CHECK(e.values(i) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(rel_frobenius(e.vectors.adjoint() * e.vectors, CMatrix::Identity(3, 3)) < 1e-12);
}

TEST_CASE("hermitian_eig on a diagonal matrix") {
    const HermitianEigen e = hermitian_eig(real_matrix({{2, 0}, {0, 5}}));
    CHECK(e.values(0) == doctest::Approx(2.0));
    CHECK(e.values(1) == doctest::Approx(5.0));
    CHECK(std::abs(e.vectors(0, 0)) == doctest::Approx(1.0));
    CHECK(std::abs(e.vectors(1, 1)) == doctest::Approx(1.0));
}

TEST_CASE("hermitian_eig of [[1, rho], [rho, 1]] solves (1 - l)^2 = rho^2") {
    const double rho = 0.5;
    const HermitianEigen e = hermitian_eig(real_matrix({{1, rho}, {rho, 1}}));
    CHECK(e.values(0) == doctest::Approx(1.0 - rho).epsilon(1e-12));
    CHECK(e.values(1) == doctest::Approx(1.0 + rho).epsilon(1e-12));
}

TEST_CASE("hermitian_eig reconstructs random Hermitian matrices") {
    for (std::size_t trial = 0; trial < 100; ++trial) {
        Rng rng = make_stream(11, trial);
        const Eigen::Index n = 1 + static_cast<Eigen::Index>(trial % 12);
        const CMatrix g = test::random_complex(rng, n, n);
        const CMatrix h = g + g.adjoint();
        const HermitianEigen e = hermitian_eig(h);
        CHECK(rel_frobenius(reconstruct(e), h) < 1e-9);
        CHECK(rel_frobenius(e.vectors.adjoint() * e.vectors, CMatrix::Identity(n, n)) < 1e-9);
        for (Eigen::Index i = 1; i < n; ++i) CHECK(e.values(i - 1) <= e.values(i));
    }
}

TEST_CASE("hermitian_eig of PSD matrices has no eigenvalue below -1e-10") {
    for (std::size_t trial = 0; trial < 100; ++trial) {
        Rng rng = make_stream(12, trial);
        const Eigen::Index n = 2 + static_cast<Eigen::Index>(trial % 10);
        const CMatrix g = test::random_complex(rng, n, 1 + static_cast<Eigen::Index>(trial % 3));
        CHECK(hermitian_eig(g * g.adjoint()).values.minCoeff() >= -1e-10);
    }
}

TEST_CASE("hermitian_eig rejects non-Hermitian and non-finite input") {
    CHECK_THROWS_AS(hermitian_eig(real_matrix({{1, 2}, {0, 1}})), DomainError);
    CMatrix bad = CMatrix::Identity(2, 2);
    bad(0, 0) = NAN;
    CHECK_THROWS_AS(hermitian_eig(bad), DomainError);
    CHECK_THROWS_AS(hermitian_eig(CMatrix::Zero(2, 3)), DomainError);
}

TEST_CASE("cholesky of identity is identity") {
    CHECK(rel_frobenius(cholesky(CMatrix::Identity(4, 4)), CMatrix::Identity(4, 4)) < 1e-15);
}

TEST_CASE("cholesky of the 2x2 correlation matrix at rho 0.5") {
    const CMatrix l = cholesky(real_matrix({{1, 0.5}, {0.5, 1}}));
    CHECK(l(0, 0).real() == doctest::Approx(1.0));
    CHECK(std::abs(l(0, 1)) == 0.0);
    CHECK(l(1, 0).real() == doctest::Approx(0.5));
    CHECK(l(1, 1).real() == doctest::Approx(std::sqrt(0.75)));
}

TEST_CASE("cholesky of singular all-ones matrix reports the failing pivot") {
    try {
        cholesky(CMatrix::Ones(2, 2));
        FAIL("expected NotPositiveDefinite");
    } catch (const NotPositiveDefinite& e) {
        CHECK(e.pivot() == 1);
    }
}

TEST_CASE("cholesky reconstructs random PD matrices with a real positive diagonal") {
    for (std::size_t trial = 0; trial < 100; ++trial) {
        Rng rng = make_stream(13, trial);
        const Eigen::Index n = 1 + static_cast<Eigen::Index>(trial % 12);
        const CMatrix h = random_pd(rng, n, 1e-3);
        const CMatrix l = cholesky(h);
        CHECK(rel_frobenius(l * l.adjoint(), h) < 1e-10);
        for (Eigen::Index i = 0; i < n; ++i) {
            CHECK(l(i, i).imag() == 0.0);
            CHECK(l(i, i).real() > 0.0);
            for (Eigen::Index j = i + 1; j < n; ++j) CHECK(l(i, j) == cdouble(0.0, 0.0));
        }
    }
}

TEST_CASE("solve_hermitian basics") {
    Rng rng = make_stream(14);
    const CMatrix b = test::random_complex(rng, 3, 2);
    CHECK(rel_frobenius(solve_hermitian(CMatrix::Identity(3, 3), b), b) < 1e-15);
    CHECK(rel_frobenius(solve_hermitian(2.0 * CMatrix::Identity(3, 3), CMatrix::Identity(3, 3)),
                        0.5 * CMatrix::Identity(3, 3)) < 1e-15);
}

TEST_CASE("solve_hermitian recovers a known solution") {
    for (std::size_t trial = 0; trial < 100; ++trial) {
        Rng rng = make_stream(15, trial);
        const CMatrix h = random_pd(rng, 5);
        const CMatrix x0 = test::random_complex(rng, 5, 3);
        const CMatrix b = h * x0;
        const CMatrix x = solve_hermitian(h, b);
        CHECK(rel_frobenius(x, x0) < 1e-8);
        CHECK((h * x - b).norm() / b.norm() < 1e-9);
    }
}

TEST_CASE("solve_hermitian propagates factorization failure") {
    CHECK_THROWS_AS(solve_hermitian(CMatrix::Ones(3, 3), CMatrix::Identity(3, 3)), NotPositiveDefinite);
}

TEST_CASE("logdet_hermitian closed forms") {
    CHECK(logdet_hermitian(CMatrix::Identity(9, 9)) == doctest::Approx(0.0));
    CHECK(logdet_hermitian(real_matrix({{std::exp(1.0), 0}, {0, std::exp(2.0)}})) == doctest::Approx(3.0));
    CHECK(logdet_hermitian(real_matrix({{1, 0.5}, {0.5, 1}})) == doctest::Approx(std::log(0.75)));
    CHECK_THROWS_AS(logdet_hermitian(-CMatrix::Identity(2, 2)), NotPositiveDefinite);
}

TEST_CASE("logdet_hermitian equals the sum of log eigenvalues") {
    for (std::size_t trial = 0; trial < 100; ++trial) {
        Rng rng = make_stream(16, trial);
        const Eigen::Index n = 1 + static_cast<Eigen::Index>(trial % 12);
        const CMatrix h = random_pd(rng, n);
        const double oracle = hermitian_eig(h).values.array().log().sum();
        CHECK(logdet_hermitian(h) == doctest::Approx(oracle).epsilon(1e-8));
    }
}

TEST_CASE("psd_sqrt closed forms") {
    CHECK(rel_frobenius(psd_sqrt(CMatrix::Identity(3, 3)), CMatrix::Identity(3, 3)) < 1e-12);
    CHECK(rel_frobenius(psd_sqrt(real_matrix({{4, 0}, {0, 9}})), real_matrix({{2, 0}, {0, 3}})) < 1e-12);
    CHECK(rel_frobenius(psd_sqrt(CMatrix::Ones(3, 3)), CMatrix::Ones(3, 3) / std::sqrt(3.0)) < 1e-8);
}

TEST_CASE("psd_sqrt squares back for random PSD matrices") {
    for (std::size_t trial = 0; trial < 100; ++trial) {
        Rng rng = make_stream(17, trial);
        const Eigen::Index n = 2 + static_cast<Eigen::Index>(trial % 9);
        const CMatrix g = test::random_complex(rng, n, 1 + static_cast<Eigen::Index>(trial % n));
        const CMatrix h = g * g.adjoint();
        const CMatrix s = psd_sqrt(h);
        CHECK(rel_frobenius(s * s.adjoint(), h) < 1e-8);
        CHECK(hermitian_defect(s) == 0.0);
        CHECK(hermitian_eig(s).values.minCoeff() >= -1e-10 * h.norm());
    }
}

TEST_CASE("psd_sqrt rejects clearly negative eigenvalues") {
    CHECK_THROWS_AS(psd_sqrt(real_matrix({{1, 0}, {0, -1e-3}})), NotPositiveSemidefinite);
    CHECK_NOTHROW(psd_sqrt(real_matrix({{1, 0}, {0, -1e-12}})));
}

TEST_CASE("hermitian_part and defect") {
    const CMatrix a = real_matrix({{1, 2}, {0, 3}});
    CHECK(hermitian_defect(a) == doctest::Approx(2.0));
    CHECK(hermitian_defect(hermitian_part(a)) == 0.0);
    CHECK(hermitian_part(a)(0, 1).real() == doctest::Approx(1.0));
}
