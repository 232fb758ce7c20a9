#include <doctest.h>

#include <filesystem>
#include <sstream>
#include <string>

#include "mbdoa/errors.hpp"
#include "mbdoa/io.hpp"
#include "support.hpp"

using namespace mbdoa;

namespace {

EncoderModel small_model(std::uint64_t seed, CovarianceMode mode) {
    EncoderArchitecture arch = EncoderArchitecture::desk(2, mode);
    arch.conv_channels = {2, 3, 4, 5};
    arch.hidden = 7;
    Rng rng = make_stream(seed);
    return init_params(arch, rng);
}

std::string serialize(const EncoderModel& model) {
    std::ostringstream out;
    write_model(out, model);
    return out.str();
}

std::string error_of(const std::string& bytes) {
    std::istringstream in(bytes);
    try {
        read_model(in);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return {};
}

}  // namespace

TEST_CASE("model round trip is bit exact") {
    for (CovarianceMode mode : {CovarianceMode::diag, CovarianceMode::full}) {
        const EncoderModel m = small_model(81, mode);
        std::istringstream in(serialize(m));
        const EncoderModel back = read_model(in);
        CHECK(back.architecture() == m.architecture());
        REQUIRE(back.parameters().size() == m.parameters().size());
        for (std::size_t i = 0; i < m.parameters().size(); ++i) CHECK(back.parameters()[i] == m.parameters()[i]);
    }
}

TEST_CASE("model file size matches the documented layout") {
    const EncoderModel m = small_model(82, CovarianceMode::diag);
    CHECK(serialize(m).size() == 4 + 1 + 4 * (3 + 4 + 1 + 4 + 4 + 1 + 1) + 8 * m.parameters().size());
}

TEST_CASE("bad magic and unsupported version are rejected") {
    std::string bytes = serialize(small_model(83, CovarianceMode::diag));
    std::string bad_magic = bytes;
    bad_magic[0] = 'X';
    CHECK(error_of(bad_magic).find("magic") != std::string::npos);
    std::string bad_version = bytes;
    bad_version[4] = 2;
    CHECK(error_of(bad_version).find("version") != std::string::npos);
}

TEST_CASE("truncation reports a byte offset") {
    const std::string bytes = serialize(small_model(84, CovarianceMode::full));
    for (std::size_t cut : {std::size_t{2}, std::size_t{7}, std::size_t{30}, bytes.size() - 3}) {
        const std::string msg = error_of(bytes.substr(0, cut));
        CHECK(msg.find("unexpected end of file") != std::string::npos);
        CHECK(msg.find("byte offset") != std::string::npos);
    }
    CHECK(error_of(bytes.substr(0, 30)).find("offset 29") != std::string::npos);
}

TEST_CASE("trailing bytes and inconsistent parameter counts are rejected") {
    const std::string bytes = serialize(small_model(85, CovarianceMode::diag));
    CHECK(error_of(bytes + "x").find("trailing") != std::string::npos);
    std::string wrong_count = bytes;
    wrong_count[5 + 4 * 17] = static_cast<char>(wrong_count[5 + 4 * 17] + 1);
    CHECK(error_of(wrong_count).find("parameter_count") != std::string::npos);
}

TEST_CASE("snapshot round trip recomputes the sample covariance") {
    Rng rng = make_stream(86);
    const CMatrix y = test::random_complex(rng, 9, 100);
    std::stringstream buf;
    write_snapshots(buf, y);
    const SnapshotBatch b = read_snapshots(buf);
    CHECK(b.snapshots == y);
    CHECK(test::rel_frobenius(b.sample_covariance, sample_covariance(y)) == 0.0);
}

TEST_CASE("snapshot files are validated") {
    Rng rng = make_stream(87);
    std::ostringstream out;
    write_snapshots(out, test::random_complex(rng, 4, 3));
    const std::string bytes = out.str();
    CHECK(bytes.size() == 4 + 1 + 8 + 4 * 3 * 16);
    const auto fails = [](const std::string& s) {
        std::istringstream in(s);
        CHECK_THROWS_AS(read_snapshots(in), ConfigError);
    };
    fails(bytes.substr(0, bytes.size() - 1));
    fails(bytes + std::string(1, '\0'));
    std::string zero_m = bytes;
    zero_m[5] = 0;
    fails(zero_m);
}

TEST_CASE("file helpers round trip and report missing files") {
    const auto dir = std::filesystem::temp_directory_path() / "mbdoa_test_io";
    std::filesystem::create_directories(dir);
    const EncoderModel m = small_model(88, CovarianceMode::full);
    save_model(dir / "m.bin", m);
    CHECK(load_model(dir / "m.bin").architecture() == m.architecture());
    CHECK_THROWS_AS(load_model(dir / "missing.bin"), ConfigError);
    std::filesystem::remove_all(dir);
}
