#pragma once

// Dense complex Hermitian linear algebra. Matrices are small (M <= 16), so all
// routines are straightforward O(n^3) dense kernels.

#include <complex>

#include <Eigen/Dense>

namespace mbdoa {

using cdouble = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RVector = Eigen::VectorXd;

struct HermitianEigen {
    RVector values;   // ascending
    CMatrix vectors;  // unitary, column j pairs with values[j]
};

/// Eigendecomposition H = V diag(w) V^H of a Hermitian matrix.
/// Throws DomainError for non-square, non-finite or non-Hermitian input and
/// NumericalError if the QL iteration does not converge.
HermitianEigen hermitian_eig(const CMatrix& h);

/// Lower-triangular L with real positive diagonal such that L L^H = H.
/// Throws NotPositiveDefinite carrying the failing pivot index.
CMatrix cholesky(const CMatrix& h);

/// Solves L L^H X = B given the Cholesky factor L.
CMatrix cholesky_solve(const CMatrix& factor, const CMatrix& b);

/// X = H^{-1} B for Hermitian positive-definite H.
CMatrix solve_hermitian(const CMatrix& h, const CMatrix& b);

/// ln det H = 2 sum ln diag(cholesky(H)).
double logdet_hermitian(const CMatrix& h);

/// Hermitian PSD square root S (S S^H = H). Eigenvalues in [-1e-10 * scale, 0)
/// are clamped to zero; anything more negative raises NotPositiveSemidefinite.
CMatrix psd_sqrt(const CMatrix& h);

/// Largest |H - H^H| entry.
double hermitian_defect(const CMatrix& h);

/// Returns (H + H^H) / 2.
CMatrix hermitian_part(const CMatrix& h);

}  // namespace mbdoa
