#pragma once

#include <cmath>
#include <random>

#include "mbdoa/linalg.hpp"
#include "mbdoa/rng.hpp"

namespace mbdoa::test {

inline CMatrix random_complex(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
    CMatrix g(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) g(i, j) = complex_normal(rng);
    }
    return g;
}

/// G G^H + eps I
inline CMatrix random_pd(Rng& rng, Eigen::Index n, double eps = 0.1) {
    const CMatrix g = random_complex(rng, n, n);
    return g * g.adjoint() + eps * CMatrix::Identity(n, n);
}

inline double rel_frobenius(const CMatrix& a, const CMatrix& b) {
    return (a - b).norm() / std::max(b.norm(), 1e-300);
}

inline double rel_norm(const std::vector<double>& a, const std::vector<double>& b) {
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        num += (a[i] - b[i]) * (a[i] - b[i]);
        den += b[i] * b[i];
    }
    return std::sqrt(num / std::max(den, 1e-300));
}

}  // namespace mbdoa::test
