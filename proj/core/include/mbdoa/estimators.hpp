#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mbdoa/array_model.hpp"
#include "mbdoa/encoder.hpp"
#include "mbdoa/linalg.hpp"

namespace mbdoa {

/// Uniform angular grid over [0, 2pi) with its steering table.
struct AngularGrid {
    std::vector<double> points;
    CMatrix steering;  // M x G

    static AngularGrid uniform(const ArrayGeometry& geometry, std::size_t size = 1200);
    std::size_t size() const { return points.size(); }
    double spacing() const { return kTwoPi / static_cast<double>(points.size()); }
};

struct EstimateDiagnostics {
    std::vector<double> spectrum;        // MUSIC pseudospectrum or SPICE grid powers
    std::vector<double> noise_powers;    // SPICE noise atoms
    std::vector<std::size_t> peak_indices;
    std::optional<LatentParams> latent;  // MBD
    CMatrix signal_covariance;           // MBD estimate of C_s
    std::size_t iterations = 0;
    double initial_loss = 0.0;
    double final_loss = 0.0;
    std::vector<std::string> warnings;
};

struct DoAEstimate {
    std::vector<double> angles;  // K radians in [0, 2pi)
    EstimateDiagnostics diagnostics;
};

/// Everything an estimator may look at for one Monte-Carlo trial. `truth` is
/// populated for benchmark/oracle estimators only; real estimators ignore it.
struct TrialContext {
    const SnapshotBatch& batch;
    std::size_t sources;
    const Scenario* truth = nullptr;
};

class Estimator {
public:
    virtual ~Estimator() = default;
    virtual std::string name() const = 0;
    virtual DoAEstimate estimate(const TrialContext& trial) const = 0;
};

/// Indices of the `count` largest circular local maxima (strictly above both
/// neighbours); shortfalls are filled with the largest remaining values.
std::vector<std::size_t> pick_peaks(const std::vector<double>& spectrum, std::size_t count);

DoAEstimate music_estimate(const CMatrix& sample_cov, const AngularGrid& grid, std::size_t sources);

struct SpiceOptions {
    std::size_t max_iterations = 200;
    double tolerance = 1e-6;  // max relative power change
};

/// SPICE over G steering atoms plus M per-sensor noise atoms.
DoAEstimate spice_estimate(const CMatrix& sample_cov, const AngularGrid& grid, std::size_t sources,
                           const SpiceOptions& options = {});

/// Criterion tr(G^H R^{-1} G) that SPICE decreases, where G is the square-root
/// (full-rank case) or the sample covariance itself (rank-deficient case).
/// Exposed for testing; `powers` holds G grid powers followed by M noise powers.
double spice_criterion(const CMatrix& sample_cov, const AngularGrid& grid, const std::vector<double>& powers);

struct RefineOptions {
    std::size_t steps = 0;
    double step_size = 1e-5;
    /// Cycle through (angles), (powers, factor), (noise) one block per step.
    bool block = false;
    CovarianceMode mode = CovarianceMode::diag;
};

struct RefineResult {
    LatentParams latent;
    double initial_loss = 0.0;
    double final_loss = 0.0;
    std::size_t improvements = 0;
    bool non_finite = false;
};

/// Fixed-step gradient descent on the SML loss in raw head coordinates,
/// returning the lowest-loss iterate seen (never worse than the start).
RefineResult ml_refine(const ArrayGeometry& geometry, const LatentParams& start, const CMatrix& sample_cov,
                       const RefineOptions& options);

DoAEstimate mbd_estimate(const EncoderModel& model, const SnapshotBatch& batch);

class MusicEstimator final : public Estimator {
public:
    MusicEstimator(std::shared_ptr<const AngularGrid> grid, std::string name = "MUSIC");
    std::string name() const override { return name_; }
    DoAEstimate estimate(const TrialContext& trial) const override;

private:
    std::shared_ptr<const AngularGrid> grid_;
    std::string name_;
};

class SpiceEstimator final : public Estimator {
public:
    SpiceEstimator(std::shared_ptr<const AngularGrid> grid, SpiceOptions options = {}, std::string name = "SPICE");
    std::string name() const override { return name_; }
    DoAEstimate estimate(const TrialContext& trial) const override;

private:
    std::shared_ptr<const AngularGrid> grid_;
    SpiceOptions options_;
    std::string name_;
};

/// Encoder inference, optionally followed by `ml_refine`.
class MbdEstimator final : public Estimator {
public:
    MbdEstimator(std::shared_ptr<const EncoderModel> model, ArrayGeometry geometry, std::string name,
                 RefineOptions refine = {});
    std::string name() const override { return name_; }
    DoAEstimate estimate(const TrialContext& trial) const override;

private:
    std::shared_ptr<const EncoderModel> model_;
    ArrayGeometry geometry_;
    std::string name_;
    RefineOptions refine_;
};

}  // namespace mbdoa
