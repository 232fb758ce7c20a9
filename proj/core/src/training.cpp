#include "mbdoa/training.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <sstream>
#include <mutex>
#include <thread>

#include "mbdoa/errors.hpp"

namespace mbdoa {

namespace {

// Gradient reduction uses a fixed partition of the batch so the summation
// order is the same for every thread count.
constexpr std::size_t kMaxChunks = 16;

std::string describe(const LatentParams& latent) {
    std::ostringstream out;
    out.precision(6);
    out << "angles=[";
    for (std::size_t i = 0; i < latent.angles.size(); ++i) out << (i ? "," : "") << latent.angles[i];
    out << "] powers=[";
    for (std::size_t i = 0; i < latent.powers.size(); ++i) out << (i ? "," : "") << latent.powers[i];
    out << "] noise_variance=" << latent.noise_variance;
    return out.str();
}

struct ChunkResult {
    std::vector<double> grad;
    double loss_sum = 0.0;
};

}  // namespace

void TrainConfig::validate() const {
    if (batch_size == 0) throw ConfigError("training: batch_size must be >= 1");
    if (batches == 0) throw ConfigError("training: batches must be >= 1");
    if (!(learning_rate > 0.0)) throw ConfigError("training: learning_rate must be positive");
    if (threads == 0) throw ConfigError("training: threads must be >= 1");
    scenario.validate();
}

double trailing_mean(const std::vector<double>& trace, std::size_t window) {
    if (trace.empty()) return 0.0;
    const std::size_t n = std::min(window, trace.size());
    return std::accumulate(trace.end() - static_cast<std::ptrdiff_t>(n), trace.end(), 0.0) / static_cast<double>(n);
}

double leading_mean(const std::vector<double>& trace, std::size_t window) {
    if (trace.empty()) return 0.0;
    const std::size_t n = std::min(window, trace.size());
    return std::accumulate(trace.begin(), trace.begin() + static_cast<std::ptrdiff_t>(n), 0.0) /
           static_cast<double>(n);
}

TrainResult train(const TrainConfig& config, const EncoderArchitecture& arch, const ArrayGeometry& geometry,
                  const TrainProgress& progress) {
    Rng init_rng = make_stream(config.seed, 0, 0);
    return train_from(init_params(arch, init_rng), config, geometry, progress);
}

TrainResult train_from(EncoderModel model, const TrainConfig& config, const ArrayGeometry& geometry,
                       const TrainProgress& progress) {
    config.validate();
    geometry.validate();
    const EncoderArchitecture arch = model.architecture();
    if (arch.input_side != geometry.antennas) throw ConfigError("training: architecture input side != antennas");
    if (arch.sources != config.scenario.sources) throw ConfigError("training: architecture sources != scenario sources");
    if (arch.mode != config.covariance) throw ConfigError("training: architecture covariance mode != config");

    const std::size_t dim = model.parameters().size();
    const std::size_t chunks = std::min(config.batch_size, kMaxChunks);
    const std::size_t workers = std::min(config.threads, chunks);
    const AdamConfig adam{config.learning_rate, config.beta1, config.beta2, config.epsilon};
    AdamState state(dim);
    std::vector<ChunkResult> results(chunks);
    for (auto& r : results) r.grad.assign(dim, 0.0);

    TrainResult out;
    out.loss_trace.reserve(config.batches);

    for (std::size_t batch = 0; batch < config.batches; ++batch) {
        std::atomic<std::size_t> next_chunk{0};
        std::atomic<bool> failed{false};
        std::string failure;
        std::mutex failure_lock;

        auto run_chunk = [&](std::size_t c) {
            ChunkResult& r = results[c];
            std::fill(r.grad.begin(), r.grad.end(), 0.0);
            r.loss_sum = 0.0;
            const std::size_t lo = c * config.batch_size / chunks;
            const std::size_t hi = (c + 1) * config.batch_size / chunks;
            for (std::size_t i = lo; i < hi && !failed.load(std::memory_order_relaxed); ++i) {
                Rng rng = make_stream(config.seed, batch + 1, i);
                const Scenario scenario = draw_scenario(config.scenario, rng);
                const SnapshotBatch data = sample_snapshots(geometry, scenario, config.scenario.snapshots, rng);
                const EncoderOutput fwd = encoder_forward(model, data.sample_covariance);
                LossAndGradient lg;
                try {
                    lg = loss_and_grad(config.loss, geometry, fwd.latent, data.sample_covariance, config.covariance);
                } catch (const std::exception&) {
                    lg.loss = NAN;
                }
                if (!std::isfinite(lg.loss)) {
                    std::lock_guard<std::mutex> lock(failure_lock);
                    if (!failed.exchange(true)) {
                        std::ostringstream msg;
                        msg << "training: non-finite loss at batch " << batch << ", sample " << i << " ("
                            << describe(fwd.latent) << ")";
                        failure = msg.str();
                    }
                    return;
                }
                r.loss_sum += lg.loss;
                const std::vector<double> raw = lg.gradient.flatten();
                encoder_backward_accumulate(model, fwd.cache, raw, r.grad);
            }
        };
        auto worker = [&] {
            for (std::size_t c = next_chunk.fetch_add(1); c < chunks; c = next_chunk.fetch_add(1)) run_chunk(c);
        };

        if (workers <= 1) {
            worker();
        } else {
            std::vector<std::thread> pool;
            pool.reserve(workers);
            for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
            for (auto& t : pool) t.join();
        }
        if (failed) throw NumericalError(failure);

        std::vector<double>& grad = results[0].grad;
        double loss_sum = results[0].loss_sum;
        for (std::size_t c = 1; c < chunks; ++c) {
            const auto& g = results[c].grad;
            for (std::size_t i = 0; i < dim; ++i) grad[i] += g[i];
            loss_sum += results[c].loss_sum;
        }
        const double scale = 1.0 / static_cast<double>(config.batch_size);
        for (double& g : grad) g *= scale;
        const double mean_loss = loss_sum * scale;

        adam_step(state, model.mutable_parameters(), grad, adam);
        out.loss_trace.push_back(mean_loss);
        if (progress) progress(batch, mean_loss);
    }
    out.model = std::move(model);
    return out;
}

}  // namespace mbdoa
