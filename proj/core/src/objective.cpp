#include "mbdoa/objective.hpp"

#include <cmath>
#include <sstream>

#include "mbdoa/errors.hpp"

namespace mbdoa {

std::vector<double> LatentGradient::flatten() const {
    std::vector<double> flat;
    flat.reserve(dimension());
    flat.insert(flat.end(), angles.begin(), angles.end());
    flat.insert(flat.end(), raw_powers.begin(), raw_powers.end());
    for (const cdouble& z : factor) {
        flat.push_back(z.real());
        flat.push_back(z.imag());
    }
    flat.push_back(log_noise);
    return flat;
}

LatentGradient LatentGradient::unflatten(const HeadLayout& layout, std::span<const double> flat) {
    if (flat.size() != layout.size()) throw ConfigError("LatentGradient: flat vector has wrong length");
    const std::size_t k = layout.sources;
    LatentGradient g;
    g.angles.assign(flat.begin(), flat.begin() + static_cast<std::ptrdiff_t>(k));
    g.raw_powers.assign(flat.begin() + static_cast<std::ptrdiff_t>(k),
                        flat.begin() + static_cast<std::ptrdiff_t>(2 * k));
    for (std::size_t e = 0; e < layout.factor_entries(); ++e) {
        g.factor.emplace_back(flat[layout.factor_offset() + 2 * e], flat[layout.factor_offset() + 2 * e + 1]);
    }
    g.log_noise = flat[layout.noise_offset()];
    return g;
}

namespace {

void require_noise(const LatentParams& latent) {
    if (!(latent.noise_variance > 0.0)) {
        std::ostringstream msg;
        msg << "loss: noise variance " << latent.noise_variance << " must be positive";
        throw DomainError(msg.str());
    }
}

// Chains dL/dP (as W with dL = Re tr(W dP), P = A C_s A^H) and dL/dsigma^2
// through the decoder and the head maps.
LatentGradient chain_to_raw(const ArrayGeometry& geometry, const LatentParams& latent, const CMatrix& w,
                            double d_noise_variance, CovarianceMode mode) {
    const std::size_t k = latent.sources();
    const auto kk = static_cast<Eigen::Index>(k);
    const CMatrix a = steering_matrix(geometry, latent.angles);
    CMatrix d(a.rows(), kk);
    for (Eigen::Index i = 0; i < kk; ++i) {
        d.col(i) = steering_derivative(geometry, latent.angles[static_cast<std::size_t>(i)]);
    }
    const CMatrix s = signal_covariance(latent.powers, latent.factor);
    const CMatrix b = latent.factor * latent.factor.adjoint();

    LatentGradient g;
    g.angles.resize(k);
    g.raw_powers.resize(k);

    // d/dtheta_k = 2 Re (C_s A^H W D)_kk
    const CMatrix awd = a.adjoint() * w * d;
    const CMatrix saw = s * awd;
    for (std::size_t i = 0; i < k; ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        const double d_theta = 2.0 * saw(ii, ii).real();
        const double frac = latent.angles[i] / kTwoPi;
        g.angles[i] = d_theta * kTwoPi * frac * (1.0 - frac);
    }

    // C_s = D_s B D_s with D_s = diag(sqrt(lambda)); Q = A^H W A.
    const CMatrix q = a.adjoint() * w * a;
    std::vector<double> root(k);
    for (std::size_t i = 0; i < k; ++i) root[i] = std::sqrt(latent.powers[i]);
    std::vector<double> d_power(k);
    double weighted = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        cdouble acc = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            const auto ii = static_cast<Eigen::Index>(i);
            const auto jj = static_cast<Eigen::Index>(j);
            acc += q(jj, ii) * b(ii, jj) * root[j];
        }
        d_power[i] = acc.real() / root[i];
        weighted += latent.powers[i] * d_power[i];
    }
    for (std::size_t i = 0; i < k; ++i) g.raw_powers[i] = latent.powers[i] * (d_power[i] - weighted);

    if (mode == CovarianceMode::full) {
        RVector rv(kk);
        for (Eigen::Index i = 0; i < kk; ++i) rv(i) = root[static_cast<std::size_t>(i)];
        const CMatrix ql = rv.asDiagonal() * q * rv.asDiagonal() * latent.factor;
        for (Eigen::Index i = 1; i < kk; ++i) {
            for (Eigen::Index j = 0; j < i; ++j) {
                g.factor.emplace_back(2.0 * ql(i, j).real(), 2.0 * ql(i, j).imag());
            }
        }
    }

    g.log_noise = d_noise_variance * latent.noise_variance;
    return g;
}

struct SmlPieces {
    double loss;
    CMatrix w;
    double d_noise;
};

SmlPieces sml_pieces(const ArrayGeometry& geometry, const LatentParams& latent, const CMatrix& sample_cov,
                     bool need_gradient) {
    require_noise(latent);
    const CMatrix c = model_covariance(geometry, latent);
    const CMatrix l = cholesky(c);
    double logdet = 0.0;
    for (Eigen::Index i = 0; i < l.rows(); ++i) logdet += std::log(l(i, i).real());
    logdet *= 2.0;
    const CMatrix inv_chat = cholesky_solve(l, sample_cov);  // C^{-1} C_hat
    SmlPieces out{logdet + inv_chat.trace().real(), {}, 0.0};
    if (need_gradient) {
        const CMatrix inv = cholesky_solve(l, CMatrix::Identity(c.rows(), c.cols()));
        // dL = tr(W dC), W = C^{-1} - C^{-1} C_hat C^{-1}
        out.w = hermitian_part(inv - inv_chat * inv);
        out.d_noise = out.w.trace().real();
    }
    return out;
}

CMatrix covmatch_residual(const ArrayGeometry& geometry, const LatentParams& latent, const CMatrix& sample_cov) {
    const CMatrix p = model_covariance(geometry, latent.angles, signal_covariance(latent.powers, latent.factor), 0.0);
    return sample_cov - p;
}

}  // namespace

double sml_loss(const CMatrix& model_cov, const CMatrix& sample_cov) {
    const CMatrix l = cholesky(model_cov);
    double logdet = 0.0;
    for (Eigen::Index i = 0; i < l.rows(); ++i) logdet += std::log(l(i, i).real());
    return 2.0 * logdet + cholesky_solve(l, sample_cov).trace().real();
}

double sml_loss(const ArrayGeometry& geometry, const LatentParams& latent, const CMatrix& sample_cov) {
    return sml_pieces(geometry, latent, sample_cov, false).loss;
}

double covmatch_loss(const ArrayGeometry& geometry, const LatentParams& latent, const CMatrix& sample_cov) {
    return covmatch_residual(geometry, latent, sample_cov).squaredNorm();
}

double evaluate_loss(LossKind kind, const ArrayGeometry& geometry, const LatentParams& latent,
                     const CMatrix& sample_cov) {
    return kind == LossKind::sml ? sml_loss(geometry, latent, sample_cov)
                                 : covmatch_loss(geometry, latent, sample_cov);
}

LatentGradient sml_loss_grad(const ArrayGeometry& geometry, const LatentParams& latent,
                             const CMatrix& sample_cov, CovarianceMode mode) {
    return loss_and_grad(LossKind::sml, geometry, latent, sample_cov, mode).gradient;
}

LatentGradient covmatch_loss_grad(const ArrayGeometry& geometry, const LatentParams& latent,
                                  const CMatrix& sample_cov, CovarianceMode mode) {
    return loss_and_grad(LossKind::covmatch, geometry, latent, sample_cov, mode).gradient;
}

LossAndGradient loss_and_grad(LossKind kind, const ArrayGeometry& geometry, const LatentParams& latent,
                              const CMatrix& sample_cov, CovarianceMode mode) {
    if (kind == LossKind::sml) {
        SmlPieces p = sml_pieces(geometry, latent, sample_cov, true);
        return {p.loss, chain_to_raw(geometry, latent, p.w, p.d_noise, mode)};
    }
    const CMatrix r = covmatch_residual(geometry, latent, sample_cov);
    // dL = -2 Re tr(R dP)
    return {r.squaredNorm(), chain_to_raw(geometry, latent, -2.0 * r, 0.0, mode)};
}

std::vector<double> finite_diff(const std::function<double(std::span<const double>)>& f,
                                std::span<const double> x, double h) {
    if (!(h >= 1e-8 && h <= 1e-3)) throw DomainError("finite_diff: step must lie in [1e-8, 1e-3]");
    std::vector<double> probe(x.begin(), x.end());
    std::vector<double> grad(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double saved = probe[i];
        probe[i] = saved + h;
        const double up = f(probe);
        probe[i] = saved - h;
        const double down = f(probe);
        probe[i] = saved;
        grad[i] = (up - down) / (2.0 * h);
    }
    return grad;
}

LatentGradient finite_diff_grad(LossKind kind, const ArrayGeometry& geometry, const LatentParams& latent,
                                const CMatrix& sample_cov, double h, CovarianceMode mode) {
    const HeadLayout layout{latent.sources(), mode};
    const std::vector<double> raw = invert_heads(layout, latent);
    const auto f = [&](std::span<const double> x) {
        return evaluate_loss(kind, geometry, apply_heads(layout, x), sample_cov);
    };
    return LatentGradient::unflatten(layout, finite_diff(f, raw, h));
}

}  // namespace mbdoa
