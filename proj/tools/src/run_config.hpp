#pragma once

// Run configuration: a YAML document with the sections documented in
// configs/SCHEMA.md. Every field has a default except where a command
// requires it (paths, sweep values and estimators).

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mbdoa/array_model.hpp"
#include "mbdoa/encoder.hpp"
#include "mbdoa/estimators.hpp"
#include "mbdoa/evaluation.hpp"
#include "mbdoa/training.hpp"

namespace mbdoa::cli {

enum class ArchitecturePreset { reference, desk };

struct ArchitectureConfig {
    ArchitecturePreset preset = ArchitecturePreset::reference;
    std::array<std::size_t, 4> conv_channels{64, 128, 256, 512};
    std::size_t hidden = 512;
};

struct EstimatorEntry {
    std::string name;
    std::string kind;  // music | spice | mbd
    std::string model;
    std::size_t refine_steps = 0;
    double refine_step_size = 1e-5;
    bool refine_block = false;
};

struct SweepConfig {
    SweepKind kind = SweepKind::snr;
    std::vector<double> values;
    std::size_t trials = 500;
    double snr_db = 20.0;
    CorrelationMode correlation = CorrelationMode::uncorrelated;
    double rho = 0.0;
    std::size_t grid_points = 1200;
    SpiceOptions spice;
    std::vector<EstimatorEntry> estimators;
};

struct PathsConfig {
    std::string model_in;
    std::string model_out;
    std::string loss_trace;
    std::string results;
};

struct RunConfig {
    std::uint64_t seed = 0;
    std::size_t threads = 1;
    ArrayGeometry geometry;
    ScenarioConfig scenario;
    TrainConfig training;  // scenario, seed and threads are filled from the top level
    ArchitectureConfig architecture;
    SweepConfig sweep;
    PathsConfig paths;

    EncoderArchitecture encoder_architecture() const;
    TrainConfig train_config() const;
    SweepSpec sweep_spec() const;
};

/// Parses YAML text. Throws ConfigError as "<source>:<line>:<col>: <field>: <reason>".
RunConfig parse_run_config(const std::string& text, const std::string& source = "<config>");
RunConfig load_run_config(const std::filesystem::path& path);

/// Fully resolved config (every default written out); parses back to an equal config.
std::string emit_run_config(const RunConfig& config);

/// Throws ConfigError "missing required field '<field>'" when `value` is empty.
void require_field(const std::string& value, const std::string& field);

}  // namespace mbdoa::cli
