#pragma once

// Training losses for the model-based decoder and their gradients in the
// pre-activation (raw head) coordinates.
//
//   SML:      ln det C_y + tr(C_y^{-1} C_hat)
//   covmatch: || C_hat - A C_s A^H ||_F^2        (no noise term)

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "mbdoa/array_model.hpp"
#include "mbdoa/heads.hpp"

namespace mbdoa {

enum class LossKind { sml, covmatch };

/// Gradient with respect to the raw head coordinates of `HeadLayout`.
struct LatentGradient {
    std::vector<double> angles;      // d/du_k, u the angle logit
    std::vector<double> raw_powers;  // d/dv_k, v the softmax input
    std::vector<cdouble> factor;     // (d/dRe, d/dIm) of L_ij, i > j, row-major; empty in diag mode
    double log_noise = 0.0;          // d/dw, sigma^2 = exp(w)

    std::size_t dimension() const { return angles.size() + raw_powers.size() + 2 * factor.size() + 1; }

    /// Flattens into the raw head layout.
    std::vector<double> flatten() const;
    static LatentGradient unflatten(const HeadLayout& layout, std::span<const double> flat);
};

struct LossAndGradient {
    double loss = 0.0;
    LatentGradient gradient;
};

/// ln det C + tr(C^{-1} C_hat) for an explicitly supplied model covariance.
double sml_loss(const CMatrix& model_cov, const CMatrix& sample_cov);
double sml_loss(const ArrayGeometry& geometry, const LatentParams& latent, const CMatrix& sample_cov);
double covmatch_loss(const ArrayGeometry& geometry, const LatentParams& latent, const CMatrix& sample_cov);
double evaluate_loss(LossKind kind, const ArrayGeometry& geometry, const LatentParams& latent,
                     const CMatrix& sample_cov);

LatentGradient sml_loss_grad(const ArrayGeometry& geometry, const LatentParams& latent,
                             const CMatrix& sample_cov, CovarianceMode mode = CovarianceMode::full);
LatentGradient covmatch_loss_grad(const ArrayGeometry& geometry, const LatentParams& latent,
                                  const CMatrix& sample_cov, CovarianceMode mode = CovarianceMode::full);

/// Loss value and gradient sharing one factorisation of C_y.
LossAndGradient loss_and_grad(LossKind kind, const ArrayGeometry& geometry, const LatentParams& latent,
                              const CMatrix& sample_cov, CovarianceMode mode);

/// Central differences of an arbitrary scalar function. h must lie in [1e-8, 1e-3].
std::vector<double> finite_diff(const std::function<double(std::span<const double>)>& f,
                                std::span<const double> x, double h);

/// Central differences of a loss over the raw head coordinates of `latent`.
LatentGradient finite_diff_grad(LossKind kind, const ArrayGeometry& geometry, const LatentParams& latent,
                                const CMatrix& sample_cov, double h,
                                CovarianceMode mode = CovarianceMode::full);

}  // namespace mbdoa
