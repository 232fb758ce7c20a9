#include "run_config.hpp"

#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "mbdoa/errors.hpp"

namespace mbdoa::cli {

namespace {

[[noreturn]] void fail_at(const std::string& source, const YAML::Mark& mark, const std::string& field,
                          const std::string& why) {
    std::ostringstream msg;
    msg << source;
    if (mark.line >= 0) msg << ':' << mark.line + 1 << ':' << mark.column + 1;
    msg << ": " << field << ": " << why;
    throw ConfigError(msg.str());
}

std::string join(const std::string& prefix, const std::string& key) {
    return prefix.empty() ? key : prefix + "." + key;
}

// A mapping node plus the keys a reader is allowed to look up; anything else
// is reported by finish().
class Section {
public:
    Section(YAML::Node node, std::string path, const std::string& source)
        : node_(std::move(node)), path_(std::move(path)), source_(source) {
        if (node_.IsDefined() && !node_.IsNull() && !node_.IsMap()) fail_at(source_, node_.Mark(), name(), "expected a mapping");
    }

    YAML::Node get(const std::string& key) {
        known_.insert(key);
        const YAML::Node absent(YAML::NodeType::Undefined);
        if (!node_.IsDefined() || node_.IsNull()) return absent;
        const YAML::Node& map = node_;  // const lookup never inserts the key
        YAML::Node n = map[key];
        if (!n.IsDefined() || n.IsNull()) return absent;
        return n;
    }

    Section child(const std::string& key) { return Section(get(key), join(path_, key), source_); }

    template <class T>
    void read(const std::string& key, T& out) {
        YAML::Node n = get(key);
        if (!n) return;
        out = convert<T>(n, join(path_, key));
    }

    template <class T>
    T convert(const YAML::Node& n, const std::string& field) const {
        if (!n.IsScalar()) fail_at(source_, n.Mark(), field, "expected a scalar");
        if constexpr (std::is_same_v<T, std::size_t> || std::is_same_v<T, std::uint64_t>) {
            long long v = 0;
            try {
                v = n.as<long long>();
            } catch (const YAML::Exception&) {
                fail_at(source_, n.Mark(), field, "expected a non-negative integer, got '" + n.Scalar() + "'");
            }
            if (v < 0) fail_at(source_, n.Mark(), field, "expected a non-negative integer, got " + n.Scalar());
            return static_cast<T>(v);
        } else if constexpr (std::is_same_v<T, bool>) {
            try {
                return n.as<bool>();
            } catch (const YAML::Exception&) {
                fail_at(source_, n.Mark(), field, "expected true or false, got '" + n.Scalar() + "'");
            }
        } else if constexpr (std::is_same_v<T, double>) {
            try {
                return n.as<double>();
            } catch (const YAML::Exception&) {
                fail_at(source_, n.Mark(), field, "expected a number, got '" + n.Scalar() + "'");
            }
        } else {
            return n.Scalar();
        }
    }

    template <class E>
    void read_enum(const std::string& key, E& out, std::initializer_list<std::pair<const char*, E>> names) {
        YAML::Node n = get(key);
        if (!n) return;
        const std::string s = convert<std::string>(n, join(path_, key));
        std::string allowed;
        for (const auto& [label, value] : names) {
            if (s == label) {
                out = value;
                return;
            }
            allowed += allowed.empty() ? label : std::string(", ") + label;
        }
        fail_at(source_, n.Mark(), join(path_, key), "unknown value '" + s + "' (expected one of: " + allowed + ")");
    }

    void finish() const {
        if (!node_.IsDefined() || node_.IsNull()) return;
        for (const auto& kv : node_) {
            const std::string key = kv.first.Scalar();
            if (!known_.count(key)) fail_at(source_, kv.first.Mark(), join(path_, key), "unknown field");
        }
    }

    std::string name() const { return path_.empty() ? "<root>" : path_; }
    const std::string& source() const { return source_; }

private:
    YAML::Node node_;
    std::string path_;
    const std::string& source_;
    std::set<std::string> known_;
};

template <class E>
const char* label_of(E value, std::initializer_list<std::pair<const char*, E>> names) {
    for (const auto& [label, v] : names) {
        if (v == value) return label;
    }
    return "?";
}

const std::initializer_list<std::pair<const char*, CorrelationMode>> kCorrelationNames{
    {"uncorrelated", CorrelationMode::uncorrelated},
    {"fixed", CorrelationMode::fixed},
    {"uniform", CorrelationMode::uniform}};
const std::initializer_list<std::pair<const char*, CovarianceMode>> kCovarianceNames{
    {"diag", CovarianceMode::diag}, {"full", CovarianceMode::full}};
const std::initializer_list<std::pair<const char*, LossKind>> kLossNames{{"sml", LossKind::sml},
                                                                         {"cov", LossKind::covmatch}};
const std::initializer_list<std::pair<const char*, SweepKind>> kSweepNames{
    {"snr", SweepKind::snr}, {"correlation", SweepKind::correlation}, {"cdf", SweepKind::cdf}};
const std::initializer_list<std::pair<const char*, ArchitecturePreset>> kPresetNames{
    {"reference", ArchitecturePreset::reference}, {"desk", ArchitecturePreset::desk}};
const std::initializer_list<std::pair<const char*, ArrayKind>> kArrayNames{{"uca", ArrayKind::uca}};

void parse_scenario(Section s, ScenarioConfig& sc) {
    s.read("sources", sc.sources);
    s.read("snapshots", sc.snapshots);
    s.read_enum("correlation", sc.correlation, kCorrelationNames);
    s.read("rho", sc.rho);
    s.read("snr_min_db", sc.snr_min_db);
    s.read("snr_max_db", sc.snr_max_db);
    s.read("power_min_db", sc.power_min_db);
    s.read("power_max_db", sc.power_max_db);
    s.finish();
}

void parse_architecture(Section s, ArchitectureConfig& a) {
    s.read_enum("preset", a.preset, kPresetNames);
    if (a.preset == ArchitecturePreset::desk) a.conv_channels = {16, 32, 64, 128};
    if (YAML::Node ch = s.get("conv_channels")) {
        const std::string field = s.name() + ".conv_channels";
        if (!ch.IsSequence() || ch.size() != 4) fail_at(s.source(), ch.Mark(), field, "expected a list of 4 integers");
        for (std::size_t i = 0; i < 4; ++i) a.conv_channels[i] = s.convert<std::size_t>(ch[i], field);
    }
    s.read("hidden", a.hidden);
    s.finish();
}

void parse_training(Section s, RunConfig& cfg) {
    TrainConfig& t = cfg.training;
    s.read("batch_size", t.batch_size);
    s.read("learning_rate", t.learning_rate);
    s.read("batches", t.batches);
    s.read("beta1", t.beta1);
    s.read("beta2", t.beta2);
    s.read("epsilon", t.epsilon);
    s.read_enum("loss", t.loss, kLossNames);
    s.read_enum("covariance", t.covariance, kCovarianceNames);
    parse_architecture(s.child("architecture"), cfg.architecture);
    s.finish();
}

void parse_sweep(Section s, SweepConfig& sw) {
    s.read_enum("kind", sw.kind, kSweepNames);
    if (YAML::Node v = s.get("values")) {
        const std::string field = s.name() + ".values";
        if (!v.IsSequence()) fail_at(s.source(), v.Mark(), field, "expected a list of numbers");
        sw.values.clear();
        for (const auto& item : v) sw.values.push_back(s.convert<double>(item, field));
    }
    s.read("trials", sw.trials);
    s.read("snr_db", sw.snr_db);
    s.read_enum("correlation", sw.correlation, kCorrelationNames);
    s.read("rho", sw.rho);
    s.read("grid_points", sw.grid_points);
    Section spice = s.child("spice");
    spice.read("max_iterations", sw.spice.max_iterations);
    spice.read("tolerance", sw.spice.tolerance);
    spice.finish();
    if (YAML::Node list = s.get("estimators")) {
        const std::string field = s.name() + ".estimators";
        if (!list.IsSequence()) fail_at(s.source(), list.Mark(), field, "expected a list of estimators");
        sw.estimators.clear();
        for (std::size_t i = 0; i < list.size(); ++i) {
            Section e(list[i], field + "[" + std::to_string(i) + "]", s.source());
            EstimatorEntry entry;
            e.read("name", entry.name);
            e.read("kind", entry.kind);
            e.read("model", entry.model);
            e.read("refine_steps", entry.refine_steps);
            e.read("refine_step_size", entry.refine_step_size);
            e.read("refine_block", entry.refine_block);
            e.finish();
            const YAML::Mark mark = list[i].Mark();
            if (entry.kind.empty()) fail_at(s.source(), mark, e.name() + ".kind", "missing required field");
            if (entry.kind != "music" && entry.kind != "spice" && entry.kind != "mbd") {
                fail_at(s.source(), mark, e.name() + ".kind",
                        "unknown value '" + entry.kind + "' (expected one of: music, spice, mbd)");
            }
            if (entry.kind == "mbd" && entry.model.empty()) {
                fail_at(s.source(), mark, e.name() + ".model", "missing required field (mbd estimators need a model)");
            }
            if (entry.name.empty()) {
                entry.name = entry.kind == "music" ? "MUSIC" : entry.kind == "spice" ? "SPICE" : "MBD";
            }
            sw.estimators.push_back(std::move(entry));
        }
    }
    s.finish();
}

std::string format_double(double v) {
    std::ostringstream out;
    out.precision(std::numeric_limits<double>::max_digits10);
    out << v;
    return out.str();
}

}  // namespace

EncoderArchitecture RunConfig::encoder_architecture() const {
    EncoderArchitecture a;
    a.conv_channels = architecture.conv_channels;
    a.hidden = architecture.hidden;
    a.sources = scenario.sources;
    a.input_side = geometry.antennas;
    a.mode = training.covariance;
    return a;
}

TrainConfig RunConfig::train_config() const {
    TrainConfig t = training;
    t.scenario = scenario;
    t.seed = seed;
    t.threads = threads;
    return t;
}

SweepSpec RunConfig::sweep_spec() const {
    SweepSpec s;
    s.kind = sweep.kind;
    s.sources = scenario.sources;
    s.snapshots = scenario.snapshots;
    s.values = sweep.values;
    s.trials = sweep.trials;
    s.snr_db = sweep.snr_db;
    s.correlation = sweep.correlation;
    s.rho = sweep.rho;
    s.power_min_db = scenario.power_min_db;
    s.power_max_db = scenario.power_max_db;
    s.seed = seed;
    s.threads = threads;
    return s;
}

RunConfig parse_run_config(const std::string& text, const std::string& source) {
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::ParserException& e) {
        fail_at(source, e.mark, "<syntax>", e.msg);
    }
    RunConfig cfg;
    Section top(root, "", source);
    top.read("seed", cfg.seed);
    top.read("threads", cfg.threads);

    Section geo = top.child("geometry");
    geo.read_enum("array", cfg.geometry.kind, kArrayNames);
    geo.read("antennas", cfg.geometry.antennas);
    geo.read("radius_over_wavelength", cfg.geometry.radius_over_wavelength);
    geo.finish();

    parse_scenario(top.child("scenario"), cfg.scenario);
    parse_training(top.child("training"), cfg);
    parse_sweep(top.child("sweep"), cfg.sweep);

    Section paths = top.child("paths");
    paths.read("model_in", cfg.paths.model_in);
    paths.read("model_out", cfg.paths.model_out);
    paths.read("loss_trace", cfg.paths.loss_trace);
    paths.read("results", cfg.paths.results);
    paths.finish();
    top.finish();

    auto check = [&](const std::string& field, auto&& fn) {
        try {
            fn();
        } catch (const std::exception& e) {
            throw ConfigError(source + ": " + field + ": " + e.what());
        }
    };
    if (cfg.threads == 0) throw ConfigError(source + ": threads: must be >= 1");
    check("geometry", [&] { cfg.geometry.validate(); });
    check("scenario", [&] { cfg.scenario.validate(); });
    check("training", [&] { cfg.train_config().validate(); });
    check("training.architecture", [&] { cfg.encoder_architecture().validate(); });
    if (cfg.sweep.grid_points == 0) throw ConfigError(source + ": sweep.grid_points: must be >= 1");
    return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    std::ostringstream text;
    text << in.rdbuf();
    return parse_run_config(text.str(), path.string());
}

std::string emit_run_config(const RunConfig& c) {
    YAML::Emitter out;
    auto num = [&](const char* key, double v) { out << YAML::Key << key << YAML::Value << format_double(v); };
    auto count = [&](const char* key, std::uint64_t v) { out << YAML::Key << key << YAML::Value << v; };
    auto str = [&](const char* key, const std::string& v) {
        out << YAML::Key << key << YAML::Value << YAML::DoubleQuoted << v;
    };

    out << YAML::BeginMap;
    count("seed", c.seed);
    count("threads", c.threads);

    out << YAML::Key << "geometry" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "array" << YAML::Value << label_of(c.geometry.kind, kArrayNames);
    count("antennas", c.geometry.antennas);
    num("radius_over_wavelength", c.geometry.radius_over_wavelength);
    out << YAML::EndMap;

    out << YAML::Key << "scenario" << YAML::Value << YAML::BeginMap;
    count("sources", c.scenario.sources);
    count("snapshots", c.scenario.snapshots);
    out << YAML::Key << "correlation" << YAML::Value << label_of(c.scenario.correlation, kCorrelationNames);
    num("rho", c.scenario.rho);
    num("snr_min_db", c.scenario.snr_min_db);
    num("snr_max_db", c.scenario.snr_max_db);
    num("power_min_db", c.scenario.power_min_db);
    num("power_max_db", c.scenario.power_max_db);
    out << YAML::EndMap;

    out << YAML::Key << "training" << YAML::Value << YAML::BeginMap;
    count("batch_size", c.training.batch_size);
    num("learning_rate", c.training.learning_rate);
    count("batches", c.training.batches);
    num("beta1", c.training.beta1);
    num("beta2", c.training.beta2);
    num("epsilon", c.training.epsilon);
    out << YAML::Key << "loss" << YAML::Value << label_of(c.training.loss, kLossNames);
    out << YAML::Key << "covariance" << YAML::Value << label_of(c.training.covariance, kCovarianceNames);
    out << YAML::Key << "architecture" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "preset" << YAML::Value << label_of(c.architecture.preset, kPresetNames);
    out << YAML::Key << "conv_channels" << YAML::Value << YAML::Flow << YAML::BeginSeq;
    for (std::size_t ch : c.architecture.conv_channels) out << static_cast<std::uint64_t>(ch);
    out << YAML::EndSeq;
    count("hidden", c.architecture.hidden);
    out << YAML::EndMap;
    out << YAML::EndMap;

    out << YAML::Key << "sweep" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "kind" << YAML::Value << label_of(c.sweep.kind, kSweepNames);
    out << YAML::Key << "values" << YAML::Value << YAML::Flow << YAML::BeginSeq;
    for (double v : c.sweep.values) out << format_double(v);
    out << YAML::EndSeq;
    count("trials", c.sweep.trials);
    num("snr_db", c.sweep.snr_db);
    out << YAML::Key << "correlation" << YAML::Value << label_of(c.sweep.correlation, kCorrelationNames);
    num("rho", c.sweep.rho);
    count("grid_points", c.sweep.grid_points);
    out << YAML::Key << "spice" << YAML::Value << YAML::BeginMap;
    count("max_iterations", c.sweep.spice.max_iterations);
    num("tolerance", c.sweep.spice.tolerance);
    out << YAML::EndMap;
    out << YAML::Key << "estimators" << YAML::Value << YAML::BeginSeq;
    for (const EstimatorEntry& e : c.sweep.estimators) {
        out << YAML::BeginMap;
        str("name", e.name);
        out << YAML::Key << "kind" << YAML::Value << e.kind;
        if (e.kind == "mbd") {
            str("model", e.model);
            count("refine_steps", e.refine_steps);
            num("refine_step_size", e.refine_step_size);
            out << YAML::Key << "refine_block" << YAML::Value << e.refine_block;
        }
        out << YAML::EndMap;
    }
    out << YAML::EndSeq;
    out << YAML::EndMap;

    out << YAML::Key << "paths" << YAML::Value << YAML::BeginMap;
    str("model_in", c.paths.model_in);
    str("model_out", c.paths.model_out);
    str("loss_trace", c.paths.loss_trace);
    str("results", c.paths.results);
    out << YAML::EndMap;

    out << YAML::EndMap;
    return std::string(out.c_str()) + "\n";
}

void require_field(const std::string& value, const std::string& field) {
    if (value.empty()) throw ConfigError("missing required field '" + field + "'");
}

}  // namespace mbdoa::cli
