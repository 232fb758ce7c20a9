#include "commands.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <ostream>

#include "mbdoa/errors.hpp"
#include "mbdoa/io.hpp"
#include "run_config.hpp"
#include "selftest.hpp"

namespace mbdoa::cli {

namespace {

RunConfig resolve_config(const CommandOptions& options) {
    RunConfig cfg = options.config.empty() ? RunConfig{} : load_run_config(options.config);
    if (options.seed) cfg.seed = *options.seed;
    if (options.threads) {
        if (*options.threads == 0) throw ConfigError("--threads must be >= 1");
        cfg.threads = *options.threads;
    }
    return cfg;
}

void write_effective_config(const CommandOptions& options, const RunConfig& cfg) {
    if (options.effective_config.empty()) return;
    std::ofstream out(options.effective_config, std::ios::trunc);
    if (!out) throw ConfigError("cannot open " + options.effective_config + " for writing");
    out << emit_run_config(cfg);
}

std::ofstream open_output(const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw ConfigError("cannot open " + path + " for writing");
    out << std::setprecision(std::numeric_limits<double>::max_digits10);
    return out;
}

void write_row(std::ostream& out, const std::string& label, const std::vector<double>& values) {
    out << label;
    for (double v : values) out << ',' << v;
    out << '\n';
}

EstimatorList build_estimators(const RunConfig& cfg) {
    if (cfg.sweep.estimators.empty()) throw ConfigError("missing required field 'sweep.estimators'");
    const auto grid = std::make_shared<const AngularGrid>(AngularGrid::uniform(cfg.geometry, cfg.sweep.grid_points));
    std::map<std::string, std::shared_ptr<const EncoderModel>> models;
    EstimatorList list;
    for (const EstimatorEntry& e : cfg.sweep.estimators) {
        if (e.kind == "music") {
            if (cfg.scenario.sources >= cfg.geometry.antennas) {
                throw ConfigError("estimator " + e.name + ": MUSIC needs fewer sources than antennas");
            }
            list.push_back(std::make_shared<MusicEstimator>(grid, e.name));
        } else if (e.kind == "spice") {
            list.push_back(std::make_shared<SpiceEstimator>(grid, cfg.sweep.spice, e.name));
        } else {
            if (!std::filesystem::exists(e.model)) {
                throw ConfigError("estimator " + e.name + ": model file " + e.model + " does not exist");
            }
            auto& model = models[e.model];
            if (!model) model = std::make_shared<const EncoderModel>(load_model(e.model));
            const EncoderArchitecture& a = model->architecture();
            if (a.input_side != cfg.geometry.antennas || a.sources != cfg.scenario.sources) {
                throw ConfigError("estimator " + e.name + ": model expects M=" + std::to_string(a.input_side) +
                                  ", K=" + std::to_string(a.sources) + " but the config has M=" +
                                  std::to_string(cfg.geometry.antennas) +
                                  ", K=" + std::to_string(cfg.scenario.sources));
            }
            RefineOptions refine;
            refine.steps = e.refine_steps;
            refine.step_size = e.refine_step_size;
            refine.block = e.refine_block;
            refine.mode = a.mode;
            list.push_back(std::make_shared<MbdEstimator>(model, cfg.geometry, e.name, refine));
        }
    }
    return list;
}

}  // namespace

int cmd_train(const CommandOptions& options, std::ostream& out, std::ostream& err) {
    RunConfig cfg = resolve_config(options);
    if (!options.out.empty()) cfg.paths.model_out = options.out;
    require_field(cfg.paths.model_out, "paths.model_out");
    write_effective_config(options, cfg);

    const TrainConfig tc = cfg.train_config();
    const EncoderArchitecture arch = cfg.encoder_architecture();
    const std::size_t every = std::max<std::size_t>(1, tc.batches / 20);
    const TrainResult result = train(tc, arch, cfg.geometry, [&](std::size_t b, double loss) {
        if (!options.quiet && (b % every == 0 || b + 1 == tc.batches)) {
            err << "batch " << b + 1 << "/" << tc.batches << " loss " << loss << '\n';
        }
    });

    save_model(cfg.paths.model_out, result.model);
    if (!cfg.paths.loss_trace.empty()) {
        std::ofstream trace = open_output(cfg.paths.loss_trace);
        trace << "batch,loss\n";
        for (std::size_t b = 0; b < result.loss_trace.size(); ++b) trace << b << ',' << result.loss_trace[b] << '\n';
    }
    out << "parameters: " << result.model.parameters().size() << '\n';
    out << "final smoothed loss: " << std::setprecision(10) << trailing_mean(result.loss_trace, 100) << '\n';
    return kExitOk;
}

int cmd_sweep(const CommandOptions& options, std::ostream& out, std::ostream&) {
    RunConfig cfg = resolve_config(options);
    if (!options.out.empty()) cfg.paths.results = options.out;
    require_field(cfg.paths.results, "paths.results");
    if (cfg.sweep.values.empty()) throw ConfigError("missing required field 'sweep.values'");
    const SweepSpec spec = cfg.sweep_spec();
    spec.validate();
    const EstimatorList estimators = build_estimators(cfg);
    write_effective_config(options, cfg);

    const SweepResult result = run_sweep(spec, cfg.geometry, estimators);
    std::ofstream file = open_output(cfg.paths.results);
    if (spec.kind == SweepKind::cdf) {
        result.write_cdf_csv(file);
    } else {
        result.write_csv(file);
    }
    result.write_csv(out);
    return kExitOk;
}

int cmd_infer(const CommandOptions& options, std::ostream& out, std::ostream&) {
    const RunConfig cfg = resolve_config(options);
    const std::string model_path = options.model.empty() ? cfg.paths.model_in : options.model;
    require_field(model_path, "--model");
    require_field(options.input, "--input");
    const EncoderModel model = load_model(model_path);
    const SnapshotBatch batch = load_snapshots(options.input);
    const std::size_t m = static_cast<std::size_t>(batch.snapshots.rows());
    if (m != model.architecture().input_side) {
        throw ConfigError("snapshot file has M=" + std::to_string(m) + " antennas but the model expects M=" +
                          std::to_string(model.architecture().input_side));
    }
    const DoAEstimate est = mbd_estimate(model, batch);
    const LatentParams& latent = *est.diagnostics.latent;
    const CMatrix& cs = est.diagnostics.signal_covariance;

    out << std::setprecision(std::numeric_limits<double>::max_digits10);
    write_row(out, "angles_rad", latent.angles);
    write_row(out, "powers", latent.powers);
    write_row(out, "noise_variance", {latent.noise_variance});
    for (Eigen::Index i = 0; i < cs.rows(); ++i) {
        std::vector<double> re;
        std::vector<double> im;
        for (Eigen::Index j = 0; j < cs.cols(); ++j) {
            re.push_back(cs(i, j).real());
            im.push_back(cs(i, j).imag());
        }
        write_row(out, "signal_cov_real_" + std::to_string(i), re);
        write_row(out, "signal_cov_imag_" + std::to_string(i), im);
    }
    return kExitOk;
}

int cmd_simulate(const CommandOptions& options, std::ostream& out, std::ostream&) {
    const RunConfig cfg = resolve_config(options);
    require_field(options.out, "--out");
    write_effective_config(options, cfg);
    Rng rng = make_stream(cfg.seed);
    const Scenario truth = draw_scenario(cfg.scenario, rng);
    const SnapshotBatch batch = sample_snapshots(cfg.geometry, truth, cfg.scenario.snapshots, rng);
    save_snapshots(options.out, batch.snapshots);
    out << std::setprecision(std::numeric_limits<double>::max_digits10);
    write_row(out, "angles_rad", truth.angles);
    write_row(out, "powers", truth.powers);
    write_row(out, "noise_variance", {truth.noise_variance});
    write_row(out, "rho", {truth.correlation});
    return kExitOk;
}

int cmd_selftest(const CommandOptions& options, std::ostream& out, std::ostream&) {
    const RunConfig cfg = resolve_config(options);
    bool ok = true;
    for (const CheckResult& r : run_invariant_suites(cfg.seed, 100)) {
        print_check(out, r);
        ok = ok && r.passed();
    }
    out << (ok ? "selftest passed" : "selftest FAILED") << '\n';
    return ok ? kExitOk : kExitNumerical;
}

}  // namespace mbdoa::cli
