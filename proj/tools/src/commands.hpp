#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

namespace mbdoa::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumerical = 3;

/// Command-line overrides shared by all subcommands.
struct CommandOptions {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> threads;
    std::string out;
    std::string model;
    std::string input;
    std::string effective_config;
    bool quiet = false;
};

int cmd_train(const CommandOptions& options, std::ostream& out, std::ostream& err);
int cmd_sweep(const CommandOptions& options, std::ostream& out, std::ostream& err);
int cmd_infer(const CommandOptions& options, std::ostream& out, std::ostream& err);
int cmd_simulate(const CommandOptions& options, std::ostream& out, std::ostream& err);
int cmd_selftest(const CommandOptions& options, std::ostream& out, std::ostream& err);

}  // namespace mbdoa::cli
