#pragma once

// Unsupervised training of the encoder against the model-based decoder.
// Every batch is freshly simulated; no sample is seen twice.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "mbdoa/adam.hpp"
#include "mbdoa/array_model.hpp"
#include "mbdoa/encoder.hpp"
#include "mbdoa/objective.hpp"

namespace mbdoa {

struct TrainConfig {
    std::size_t batch_size = 256;
    double learning_rate = 1e-3;
    std::size_t batches = 40000;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    LossKind loss = LossKind::sml;
    CovarianceMode covariance = CovarianceMode::diag;
    ScenarioConfig scenario;
    std::uint64_t seed = 0;
    /// Worker threads for the per-sample work. Results do not depend on it.
    std::size_t threads = 1;

    void validate() const;
};

struct TrainResult {
    EncoderModel model;
    std::vector<double> loss_trace;  // mean loss per batch
};

/// Called after every batch with (batch index, mean loss).
using TrainProgress = std::function<void(std::size_t, double)>;

/// Runs the full loop: draw scenarios, simulate snapshots, forward, loss,
/// backward, average, Adam. Throws NumericalError on a non-finite loss.
TrainResult train(const TrainConfig& config, const EncoderArchitecture& arch, const ArrayGeometry& geometry,
                  const TrainProgress& progress = {});

/// Continues training an existing model (same contract as `train`).
TrainResult train_from(EncoderModel model, const TrainConfig& config, const ArrayGeometry& geometry,
                       const TrainProgress& progress = {});

/// Mean of the last `window` entries (or all, if fewer).
double trailing_mean(const std::vector<double>& trace, std::size_t window);
/// Mean of the first `window` entries (or all, if fewer).
double leading_mean(const std::vector<double>& trace, std::size_t window);

}  // namespace mbdoa
