#include "mbdoa/linalg.hpp"

#include <cmath>
#include <sstream>

#include "mbdoa/errors.hpp"

namespace mbdoa {

namespace {

void require_square(const CMatrix& h, const char* op) {
    if (h.rows() != h.cols() || h.rows() == 0) {
        std::ostringstream msg;
        msg << op << ": expected a non-empty square matrix, got " << h.rows() << "x" << h.cols();
        throw DomainError(msg.str());
    }
}

void require_hermitian(const CMatrix& h, const char* op) {
    require_square(h, op);
    if (!h.allFinite()) throw DomainError(std::string(op) + ": matrix has non-finite entries");
    const double scale = std::max(1.0, h.cwiseAbs().maxCoeff());
    if (hermitian_defect(h) > 1e-9 * scale) {
        std::ostringstream msg;
        msg << op << ": matrix is not Hermitian (defect " << hermitian_defect(h) << ")";
        throw DomainError(msg.str());
    }
}

}  // namespace

double hermitian_defect(const CMatrix& h) {
    if (h.rows() != h.cols()) return INFINITY;
    return (h - h.adjoint()).cwiseAbs().maxCoeff();
}

CMatrix hermitian_part(const CMatrix& h) { return 0.5 * (h + h.adjoint()); }

HermitianEigen hermitian_eig(const CMatrix& h) {
    require_hermitian(h, "hermitian_eig");
    // Householder tridiagonalisation followed by implicit symmetric QL.
    Eigen::SelfAdjointEigenSolver<CMatrix> solver(hermitian_part(h));
    if (solver.info() != Eigen::Success) {
        std::ostringstream msg;
        msg << "hermitian_eig: no convergence for " << h.rows() << "x" << h.cols()
            << " matrix with Frobenius norm " << h.norm() << " and max |entry| "
            << h.cwiseAbs().maxCoeff();
        throw NumericalError(msg.str());
    }
    return {solver.eigenvalues(), solver.eigenvectors()};
}

CMatrix cholesky(const CMatrix& h) {
    require_square(h, "cholesky");
    const Eigen::Index n = h.rows();
    CMatrix l = CMatrix::Zero(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        double pivot = h(j, j).real();
        for (Eigen::Index k = 0; k < j; ++k) pivot -= std::norm(l(j, k));
        if (!(pivot > 0.0) || !std::isfinite(pivot)) {
            throw NotPositiveDefinite(static_cast<std::size_t>(j), pivot);
        }
        const double d = std::sqrt(pivot);
        l(j, j) = d;
        for (Eigen::Index i = j + 1; i < n; ++i) {
            cdouble s = h(i, j);
            for (Eigen::Index k = 0; k < j; ++k) s -= l(i, k) * std::conj(l(j, k));
            l(i, j) = s / d;
        }
    }
    return l;
}

CMatrix cholesky_solve(const CMatrix& factor, const CMatrix& b) {
    const Eigen::Index n = factor.rows();
    if (b.rows() != n) throw DomainError("cholesky_solve: right-hand side has wrong row count");
    CMatrix x = b;
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
        // L z = b
        for (Eigen::Index i = 0; i < n; ++i) {
            cdouble s = x(i, c);
            for (Eigen::Index k = 0; k < i; ++k) s -= factor(i, k) * x(k, c);
            x(i, c) = s / factor(i, i).real();
        }
        // L^H x = z
        for (Eigen::Index i = n - 1; i >= 0; --i) {
            cdouble s = x(i, c);
            for (Eigen::Index k = i + 1; k < n; ++k) s -= std::conj(factor(k, i)) * x(k, c);
            x(i, c) = s / factor(i, i).real();
        }
    }
    return x;
}

CMatrix solve_hermitian(const CMatrix& h, const CMatrix& b) {
    return cholesky_solve(cholesky(h), b);
}

double logdet_hermitian(const CMatrix& h) {
    const CMatrix l = cholesky(h);
    double acc = 0.0;
    for (Eigen::Index i = 0; i < l.rows(); ++i) acc += std::log(l(i, i).real());
    return 2.0 * acc;
}

CMatrix psd_sqrt(const CMatrix& h) {
    const HermitianEigen eig = hermitian_eig(h);
    const double scale = std::max(1.0, eig.values.cwiseAbs().maxCoeff());
    RVector root(eig.values.size());
    for (Eigen::Index i = 0; i < eig.values.size(); ++i) {
        const double w = eig.values(i);
        if (w < -1e-10 * scale) {
            std::ostringstream msg;
            msg << "psd_sqrt: eigenvalue " << w << " at index " << i << " is negative";
            throw NotPositiveSemidefinite(msg.str());
        }
        root(i) = std::sqrt(std::max(w, 0.0));
    }
    return hermitian_part(eig.vectors * root.asDiagonal() * eig.vectors.adjoint());
}

}  // namespace mbdoa
