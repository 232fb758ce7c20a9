#include "mbdoa/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <thread>

#include "mbdoa/errors.hpp"

namespace mbdoa {

double wrap_to_pi(double x) {
    constexpr double pi = kTwoPi / 2.0;
    double r = x - kTwoPi * std::floor((x + pi) / kTwoPi);
    if (r >= pi) r -= kTwoPi;
    if (r < -pi) r += kTwoPi;
    return r;
}

MatchedErrors periodic_error(std::span<const double> truth, std::span<const double> estimate) {
    if (truth.size() != estimate.size()) throw DomainError("periodic_error: truth and estimate counts differ");
    const std::size_t k = truth.size();
    std::vector<std::size_t> perm(k);
    std::iota(perm.begin(), perm.end(), 0);
    MatchedErrors best;
    double best_cost = INFINITY;
    do {
        double cost = 0.0;
        for (std::size_t i = 0; i < k; ++i) {
            const double e = wrap_to_pi(truth[i] - estimate[perm[i]]);
            cost += e * e;
        }
        if (cost < best_cost) {
            best_cost = cost;
            best.assignment = perm;
        }
    } while (std::next_permutation(perm.begin(), perm.end()));
    best.errors.resize(k);
    for (std::size_t i = 0; i < k; ++i) best.errors[i] = wrap_to_pi(truth[i] - estimate[best.assignment[i]]);
    return best;
}

double rmspe(std::span<const AnglePair> pairs) {
    if (pairs.empty()) throw DomainError("rmspe: no estimates");
    const std::size_t k = pairs.front().truth.size();
    double acc = 0.0;
    for (const AnglePair& p : pairs) {
        if (p.truth.size() != k) throw DomainError("rmspe: inconsistent source count");
        for (double e : periodic_error(p.truth, p.estimate).errors) acc += e * e;
    }
    return std::sqrt(acc / static_cast<double>(pairs.size() * k));
}

void SweepSpec::validate() const {
    if (values.empty()) throw ConfigError("sweep: values must be non-empty");
    if (trials == 0) throw ConfigError("sweep: trials must be >= 1");
    if (sources == 0) throw ConfigError("sweep: sources must be >= 1");
    if (snapshots == 0) throw ConfigError("sweep: snapshots must be >= 1");
    if (threads == 0) throw ConfigError("sweep: threads must be >= 1");
    if (kind != SweepKind::snr) {
        for (double v : values) {
            if (!(v >= 0.0 && v <= 1.0)) throw ConfigError("sweep: correlation values must lie in [0, 1]");
        }
    }
    if (kind == SweepKind::cdf && values.size() != 1) throw ConfigError("sweep: cdf sweeps take exactly one rho value");
}

ScenarioConfig SweepSpec::scenario_at(double value) const {
    ScenarioConfig s;
    s.sources = sources;
    s.snapshots = snapshots;
    s.power_min_db = power_min_db;
    s.power_max_db = power_max_db;
    if (kind == SweepKind::snr) {
        s.snr_min_db = s.snr_max_db = value;
        s.correlation = correlation;
        s.rho = rho;
    } else {
        s.snr_min_db = s.snr_max_db = snr_db;
        s.correlation = value == 0.0 ? CorrelationMode::uncorrelated : CorrelationMode::fixed;
        s.rho = value;
    }
    return s;
}

const SweepCell& SweepResult::cell(double value, const std::string& estimator) const {
    for (const SweepCell& c : cells) {
        if (c.value == value && c.estimator == estimator) return c;
    }
    throw DomainError("sweep result: no cell for estimator " + estimator);
}

void SweepResult::write_csv(std::ostream& out) const {
    out << "sweep_value,estimator,rmspe,trials,outlier_count\n";
    out << std::setprecision(12);
    for (const SweepCell& c : cells) {
        out << c.value << ',' << c.estimator << ',' << c.rmspe << ',' << c.trials << ',' << c.outliers << '\n';
    }
}

void SweepResult::write_cdf_csv(std::ostream& out) const {
    out << "estimator,error_sample\n";
    out << std::setprecision(12);
    for (const SweepCell& c : cells) {
        for (double e : c.error_samples) out << c.estimator << ',' << e << '\n';
    }
}

namespace {

struct TrialOutcome {
    std::vector<double> sq_errors;  // per estimator, sum over angles
    std::vector<std::vector<double>> abs_errors;
    std::vector<bool> failed;
    std::vector<double> seconds;
};

}  // namespace

SweepResult run_sweep(const SweepSpec& spec, const ArrayGeometry& geometry, const EstimatorList& estimators) {
    spec.validate();
    geometry.validate();
    if (estimators.empty()) throw ConfigError("sweep: no estimators configured");
    const std::size_t e_count = estimators.size();
    const std::size_t k = spec.sources;
    constexpr double pi = kTwoPi / 2.0;

    SweepResult result;
    result.kind = spec.kind;

    for (std::size_t v = 0; v < spec.values.size(); ++v) {
        const double value = spec.values[v];
        const ScenarioConfig scenario_cfg = spec.scenario_at(value);
        std::vector<TrialOutcome> outcomes(spec.trials);

        auto run_trial = [&](std::size_t t) {
            Rng rng = make_stream(spec.seed, v, t);
            const Scenario truth = draw_scenario(scenario_cfg, rng);
            const SnapshotBatch batch = sample_snapshots(geometry, truth, spec.snapshots, rng);
            TrialOutcome& o = outcomes[t];
            o.sq_errors.assign(e_count, 0.0);
            o.abs_errors.assign(e_count, {});
            o.failed.assign(e_count, false);
            o.seconds.assign(e_count, 0.0);
            const TrialContext ctx{batch, k, &truth};
            for (std::size_t e = 0; e < e_count; ++e) {
                const auto start = std::chrono::steady_clock::now();
                std::vector<double> errors;
                try {
                    const DoAEstimate est = estimators[e]->estimate(ctx);
                    errors = periodic_error(truth.angles, est.angles).errors;
                } catch (const std::exception&) {
                    o.failed[e] = true;
                    errors.assign(k, pi);
                }
                o.seconds[e] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
                for (double err : errors) {
                    o.sq_errors[e] += err * err;
                    o.abs_errors[e].push_back(std::abs(err));
                }
            }
        };

        const std::size_t workers = std::min(spec.threads, spec.trials);
        if (workers <= 1) {
            for (std::size_t t = 0; t < spec.trials; ++t) run_trial(t);
        } else {
            std::atomic<std::size_t> next{0};
            std::vector<std::thread> pool;
            for (std::size_t w = 0; w < workers; ++w) {
                pool.emplace_back([&] {
                    for (std::size_t t = next.fetch_add(1); t < spec.trials; t = next.fetch_add(1)) run_trial(t);
                });
            }
            for (auto& th : pool) th.join();
        }

        for (std::size_t e = 0; e < e_count; ++e) {
            SweepCell cell;
            cell.value = value;
            cell.estimator = estimators[e]->name();
            cell.trials = spec.trials;
            double acc = 0.0;
            for (const TrialOutcome& o : outcomes) {
                acc += o.sq_errors[e];
                cell.outliers += o.failed[e] ? 1 : 0;
                cell.wall_seconds += o.seconds[e];
                if (spec.kind == SweepKind::cdf) {
                    cell.error_samples.insert(cell.error_samples.end(), o.abs_errors[e].begin(), o.abs_errors[e].end());
                }
            }
            cell.rmspe = std::sqrt(acc / static_cast<double>(spec.trials * k));
            result.cells.push_back(std::move(cell));
        }
    }
    return result;
}

}  // namespace mbdoa
