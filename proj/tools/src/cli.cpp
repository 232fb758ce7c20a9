#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <functional>
#include <map>
#include <ostream>

#include "commands.hpp"
#include "mbdoa/errors.hpp"

namespace mbdoa::cli {

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Model-based DoA estimation: training, sweeps and inference"};
    app.require_subcommand(1);
    CommandOptions opts;
    std::uint64_t seed = 0;
    std::size_t threads = 1;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", opts.config, "YAML run configuration")->check(CLI::ExistingFile);
        sub->add_option("--seed", seed, "override the config seed");
        sub->add_option("--threads", threads, "worker threads (1 guarantees determinism)");
    };

    CLI::App* train = app.add_subcommand("train", "train an encoder and write the model file");
    common(train);
    train->add_option("--out", opts.out, "model file (overrides paths.model_out)");
    train->add_option("--effective-config", opts.effective_config, "write the resolved config here");
    train->add_flag("--quiet", opts.quiet, "no progress lines on stderr");

    CLI::App* sweep = app.add_subcommand("sweep", "Monte-Carlo RMSPE sweep; writes CSV");
    common(sweep);
    sweep->add_option("--out", opts.out, "results CSV (overrides paths.results)");
    sweep->add_option("--effective-config", opts.effective_config, "write the resolved config here");

    CLI::App* infer = app.add_subcommand("infer", "estimate parameters from a snapshot file");
    common(infer);
    infer->add_option("--model", opts.model, "model file (overrides paths.model_in)");
    infer->add_option("--input", opts.input, "snapshot file")->required();

    CLI::App* simulate = app.add_subcommand("simulate", "draw one scenario and write its snapshot file");
    common(simulate);
    simulate->add_option("--out", opts.out, "snapshot file")->required();
    simulate->add_option("--effective-config", opts.effective_config, "write the resolved config here");

    CLI::App* selftest = app.add_subcommand("selftest", "gradient checks and invariant suites");
    common(selftest);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        const auto subs = app.get_subcommands();
        out << (subs.empty() ? app.help() : subs.front()->help());
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\nrun with --help for usage\n";
        return kExitConfig;
    }

    CLI::App* chosen = app.get_subcommands().front();
    if (chosen->count("--seed")) opts.seed = seed;
    if (chosen->count("--threads")) opts.threads = threads;

    const std::map<CLI::App*, std::function<int(const CommandOptions&, std::ostream&, std::ostream&)>> table{
        {train, cmd_train}, {sweep, cmd_sweep}, {infer, cmd_infer}, {simulate, cmd_simulate}, {selftest, cmd_selftest}};
    try {
        return table.at(chosen)(opts, out, err);
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const DomainError& e) {
        err << "error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        err << "numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    }
}

}  // namespace mbdoa::cli
