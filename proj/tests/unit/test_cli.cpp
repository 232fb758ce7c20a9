#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <algorithm>
#include <array>
#include <iterator>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "mbdoa/encoder.hpp"
#include "mbdoa/io.hpp"
#include "run_config.hpp"

using namespace mbdoa;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code = 0;
    std::string out;
    std::string err;
};

Run run(const std::vector<std::string>& args) {
    std::ostringstream out;
    std::ostringstream err;
    const int code = cli::run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

class TempDir {
public:
    TempDir() : path_(fs::temp_directory_path() / ("mbdoa_cli_" + std::to_string(counter_++))) {
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() { fs::remove_all(path_); }
    std::string file(const std::string& name) const { return (path_ / name).string(); }
    std::string write(const std::string& name, const std::string& text) const {
        std::ofstream(file(name)) << text;
        return file(name);
    }

private:
    static inline int counter_ = 0;
    fs::path path_;
};

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

const char* kTinyTraining = R"(seed: 3
scenario:
  sources: 2
training:
  batch_size: 4
  batches: 3
  architecture:
    conv_channels: [2, 3, 4, 5]
    hidden: 6
)";

std::vector<std::string> split_csv_row(const std::string& line) {
    std::vector<std::string> cells;
    std::stringstream s(line);
    std::string cell;
    while (std::getline(s, cell, ',')) cells.push_back(cell);
    return cells;
}

}  // namespace

TEST_CASE("missing required field exits 2 and names the field") {
    TempDir dir;
    const std::string cfg = dir.write("c.yaml", kTinyTraining);
    const Run r = run({"train", "--config", cfg, "--quiet"});
    CHECK(r.code == 2);
    CHECK(r.err.find("paths.model_out") != std::string::npos);

    const std::string sweep = dir.write("s.yaml", "sweep:\n  estimators:\n    - kind: music\npaths:\n  results: x.csv\n");
    const Run s = run({"sweep", "--config", sweep});
    CHECK(s.code == 2);
    CHECK(s.err.find("sweep.values") != std::string::npos);
}

TEST_CASE("unknown fields and bad values report line and column") {
    TempDir dir;
    const std::string cfg = dir.write("c.yaml", "seed: 1\ntraining:\n  batch_size: 4\n  learnig_rate: 0.1\n");
    const Run r = run({"train", "--config", cfg, "--out", dir.file("m.bin")});
    CHECK(r.code == 2);
    CHECK(r.err.find(":4:") != std::string::npos);
    CHECK(r.err.find("learnig_rate") != std::string::npos);

    const std::string bad = dir.write("b.yaml", "training:\n  loss: likelihood\n");
    const Run b = run({"train", "--config", bad, "--out", dir.file("m.bin")});
    CHECK(b.code == 2);
    CHECK(b.err.find("training.loss") != std::string::npos);
    CHECK(b.err.find("sml") != std::string::npos);
}

TEST_CASE("usage errors exit 2") {
    CHECK(run({}).code == 2);
    CHECK(run({"bogus"}).code == 2);
    CHECK(run({"train", "--config", "/nonexistent/file.yaml"}).code == 2);
    CHECK(run({"--help"}).code == 0);
}

TEST_CASE("train writes a model matching the architecture and is deterministic") {
    TempDir dir;
    const std::string cfg = dir.write("c.yaml", kTinyTraining);
    const Run a = run({"train", "--config", cfg, "--out", dir.file("a.bin"), "--threads", "1", "--quiet"});
    REQUIRE(a.code == 0);
    const Run b = run({"train", "--config", cfg, "--out", dir.file("b.bin"), "--threads", "1", "--quiet"});
    REQUIRE(b.code == 0);
    CHECK(slurp(dir.file("a.bin")) == slurp(dir.file("b.bin")));
    const EncoderModel m = load_model(dir.file("a.bin"));
    CHECK(m.parameters().size() == m.architecture().parameter_count());
    CHECK(m.architecture().conv_channels == std::array<std::size_t, 4>{2, 3, 4, 5});
    CHECK(a.out.find("parameters: " + std::to_string(m.parameters().size())) != std::string::npos);

    const Run c = run({"train", "--config", cfg, "--out", dir.file("c.bin"), "--seed", "4", "--quiet"});
    REQUIRE(c.code == 0);
    CHECK(slurp(dir.file("a.bin")) != slurp(dir.file("c.bin")));
}

TEST_CASE("train writes the loss trace CSV") {
    TempDir dir;
    const std::string cfg =
        dir.write("c.yaml", std::string(kTinyTraining) + "paths:\n  loss_trace: " + dir.file("trace.csv") + "\n");
    REQUIRE(run({"train", "--config", cfg, "--out", dir.file("m.bin"), "--quiet"}).code == 0);
    const std::string trace = slurp(dir.file("trace.csv"));
    CHECK(trace.rfind("batch,loss\n0,", 0) == 0);
    CHECK(std::count(trace.begin(), trace.end(), '\n') == 4);
}

TEST_CASE("MUSIC-only SNR sweep writes one row per value and is deterministic") {
    TempDir dir;
    const std::string cfg = dir.write("s.yaml", R"(seed: 11
sweep:
  kind: snr
  values: [-10, 0, 10, 20, 30]
  trials: 20
  estimators:
    - kind: music
)");
    const Run a = run({"sweep", "--config", cfg, "--out", dir.file("a.csv")});
    REQUIRE(a.code == 0);
    const std::string csv = slurp(dir.file("a.csv"));
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 6);
    CHECK(csv == a.out);
    REQUIRE(run({"sweep", "--config", cfg, "--out", dir.file("b.csv")}).code == 0);
    CHECK(csv == slurp(dir.file("b.csv")));
}

TEST_CASE("cdf sweep with 100 trials and K=3 yields 300 samples per estimator") {
    TempDir dir;
    const std::string cfg = dir.write("s.yaml", R"(sweep:
  kind: cdf
  values: [1]
  trials: 100
  grid_points: 360
  estimators:
    - kind: music
    - kind: spice
)");
    REQUIRE(run({"sweep", "--config", cfg, "--out", dir.file("cdf.csv")}).code == 0);
    std::ifstream in(dir.file("cdf.csv"));
    std::string line;
    std::getline(in, line);
    CHECK(line == "estimator,error_sample");
    std::size_t music = 0;
    std::size_t spice = 0;
    while (std::getline(in, line)) {
        const auto cells = split_csv_row(line);
        music += cells[0] == "MUSIC";
        spice += cells[0] == "SPICE";
    }
    CHECK(music == 300);
    CHECK(spice == 300);
}

TEST_CASE("sweep rejects missing or mismatched models") {
    TempDir dir;
    const std::string missing = dir.write("s.yaml", "sweep:\n  values: [20]\n  estimators:\n    - kind: mbd\n      model: " +
                                                        dir.file("none.bin") + "\n");
    const Run r = run({"sweep", "--config", missing, "--out", dir.file("r.csv")});
    CHECK(r.code == 2);
    CHECK(r.err.find("does not exist") != std::string::npos);

    const std::string train_cfg = dir.write("c.yaml", kTinyTraining);
    REQUIRE(run({"train", "--config", train_cfg, "--out", dir.file("k2.bin"), "--quiet"}).code == 0);
    const std::string mismatch = dir.write("m.yaml", "sweep:\n  values: [20]\n  estimators:\n    - kind: mbd\n      model: " +
                                                         dir.file("k2.bin") + "\n");
    const Run m = run({"sweep", "--config", mismatch, "--out", dir.file("r.csv")});
    CHECK(m.code == 2);
    CHECK(m.err.find("K=2") != std::string::npos);
}

TEST_CASE("simulate and infer round trip") {
    TempDir dir;
    const std::string cfg = dir.write("c.yaml", kTinyTraining);
    REQUIRE(run({"train", "--config", cfg, "--out", dir.file("m.bin"), "--quiet"}).code == 0);
    const Run sim = run({"simulate", "--config", cfg, "--out", dir.file("y.bin")});
    REQUIRE(sim.code == 0);
    CHECK(sim.out.rfind("angles_rad,", 0) == 0);

    const Run inf = run({"infer", "--model", dir.file("m.bin"), "--input", dir.file("y.bin")});
    REQUIRE(inf.code == 0);
    std::istringstream lines(inf.out);
    std::string line;
    std::vector<std::vector<std::string>> rows;
    while (std::getline(lines, line)) rows.push_back(split_csv_row(line));
    REQUIRE(rows.size() == 3 + 2 * 2);
    CHECK(rows[0][0] == "angles_rad");
    CHECK(rows[0].size() == 3);
    CHECK(rows[1][0] == "powers");
    double sum = 0.0;
    for (std::size_t i = 1; i < rows[1].size(); ++i) sum += std::stod(rows[1][i]);
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(rows[2][0] == "noise_variance");
    CHECK(std::stod(rows[2][1]) > 0.0);
    CHECK(rows[3][0] == "signal_cov_real_0");
}

TEST_CASE("infer rejects malformed and mismatched snapshot files") {
    TempDir dir;
    const std::string cfg = dir.write("c.yaml", kTinyTraining);
    REQUIRE(run({"train", "--config", cfg, "--out", dir.file("m.bin"), "--quiet"}).code == 0);
    REQUIRE(run({"simulate", "--config", cfg, "--out", dir.file("y.bin")}).code == 0);
    const std::string good = slurp(dir.file("y.bin"));
    std::ofstream(dir.file("short.bin"), std::ios::binary) << good.substr(0, good.size() - 5);
    const Run r = run({"infer", "--model", dir.file("m.bin"), "--input", dir.file("short.bin")});
    CHECK(r.code == 2);
    CHECK(r.err.find("byte offset") != std::string::npos);

    const std::string ten = dir.write("ten.yaml", "geometry:\n  antennas: 10\nscenario:\n  sources: 2\n");
    REQUIRE(run({"simulate", "--config", ten, "--out", dir.file("y10.bin")}).code == 0);
    CHECK(run({"infer", "--model", dir.file("m.bin"), "--input", dir.file("y10.bin")}).code == 2);
}

TEST_CASE("effective config round trips to identical outputs") {
    TempDir dir;
    const std::string cfg = dir.write("c.yaml", kTinyTraining);
    REQUIRE(run({"train", "--config", cfg, "--out", dir.file("a.bin"), "--effective-config", dir.file("eff.yaml"),
                 "--quiet"})
                .code == 0);
    const std::string effective = slurp(dir.file("eff.yaml"));
    CHECK(effective.find("learning_rate") != std::string::npos);
    REQUIRE(run({"train", "--config", dir.file("eff.yaml"), "--out", dir.file("b.bin"), "--quiet"}).code == 0);
    CHECK(slurp(dir.file("a.bin")) == slurp(dir.file("b.bin")));
    const cli::RunConfig parsed = cli::parse_run_config(effective, "eff.yaml");
    CHECK(cli::emit_run_config(parsed) == effective);
}

TEST_CASE("defaults resolve to the reference simulation parameters") {
    const cli::RunConfig c = cli::parse_run_config("{}", "empty");
    CHECK(c.geometry.antennas == 9);
    CHECK(c.geometry.radius_over_wavelength == 1.0);
    CHECK(c.scenario.snapshots == 100);
    CHECK(c.scenario.sources == 3);
    CHECK(c.scenario.snr_min_db == -10.0);
    CHECK(c.scenario.snr_max_db == 30.0);
    CHECK(c.training.batch_size == 256);
    CHECK(c.training.learning_rate == 1e-3);
    CHECK(c.training.batches == 40000);
    CHECK(c.sweep.grid_points == 1200);
    CHECK(c.architecture.conv_channels == std::array<std::size_t, 4>{64, 128, 256, 512});
}

TEST_CASE("selftest passes") {
    const Run r = run({"selftest"});
    CHECK(r.code == 0);
    CHECK(r.out.find("FAIL") == std::string::npos);
    CHECK(r.out.find("selftest passed") != std::string::npos);
}
