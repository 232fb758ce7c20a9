#include "mbdoa/io.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "mbdoa/errors.hpp"

namespace mbdoa {

namespace {

class Writer {
public:
    explicit Writer(std::ostream& out) : out_(out) {}

    void bytes(const char* data, std::size_t n) { out_.write(data, static_cast<std::streamsize>(n)); }
    void u8(unsigned char v) { out_.put(static_cast<char>(v)); }
    void i32(std::int64_t v) {
        if (v < 0 || v > std::numeric_limits<std::int32_t>::max()) throw ConfigError("write: field exceeds int32");
        const auto u = static_cast<std::uint32_t>(v);
        const std::array<char, 4> b{static_cast<char>(u & 0xff), static_cast<char>((u >> 8) & 0xff),
                                    static_cast<char>((u >> 16) & 0xff), static_cast<char>((u >> 24) & 0xff)};
        bytes(b.data(), 4);
    }
    void f64(double v) {
        const auto u = std::bit_cast<std::uint64_t>(v);
        std::array<char, 8> b{};
        for (std::size_t i = 0; i < 8; ++i) b[i] = static_cast<char>((u >> (8 * i)) & 0xff);
        bytes(b.data(), 8);
    }

private:
    std::ostream& out_;
};

class Reader {
public:
    Reader(std::istream& in, const char* what) : in_(in), what_(what) {}

    std::uint64_t offset() const { return offset_; }

    void bytes(char* dst, std::size_t n, const char* field) {
        in_.read(dst, static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in_.gcount()) != n) {
            fail(field, "unexpected end of file");
        }
        offset_ += n;
    }
    unsigned char u8(const char* field) {
        char c = 0;
        bytes(&c, 1, field);
        return static_cast<unsigned char>(c);
    }
    std::int32_t i32(const char* field) {
        std::array<unsigned char, 4> b{};
        bytes(reinterpret_cast<char*>(b.data()), 4, field);
        const std::uint32_t u = b[0] | (b[1] << 8) | (b[2] << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
        return static_cast<std::int32_t>(u);
    }
    double f64(const char* field) {
        std::array<unsigned char, 8> b{};
        bytes(reinterpret_cast<char*>(b.data()), 8, field);
        std::uint64_t u = 0;
        for (std::size_t i = 0; i < 8; ++i) u |= static_cast<std::uint64_t>(b[i]) << (8 * i);
        return std::bit_cast<double>(u);
    }
    [[noreturn]] void fail(const char* field, const std::string& why) const {
        std::ostringstream msg;
        msg << what_ << ": " << why << " while reading " << field << " at byte offset " << offset_;
        throw ConfigError(msg.str());
    }
    void expect_end() {
        if (in_.peek() != std::char_traits<char>::eof()) fail("end of file", "trailing bytes");
    }

private:
    std::istream& in_;
    const char* what_;
    std::uint64_t offset_ = 0;
};

std::size_t positive(Reader& r, std::int32_t v, const char* field, std::uint64_t at) {
    if (v <= 0) {
        std::ostringstream msg;
        msg << "non-positive value " << v << " (field starts at byte offset " << at << ")";
        r.fail(field, msg.str());
    }
    return static_cast<std::size_t>(v);
}

}  // namespace

void write_model(std::ostream& out, const EncoderModel& model) {
    const EncoderArchitecture& a = model.architecture();
    Writer w(out);
    w.bytes("MBDE", 4);
    w.u8(kModelFormatVersion);
    w.i32(static_cast<std::int64_t>(a.input_side));
    w.i32(static_cast<std::int64_t>(a.sources));
    w.i32(a.mode == CovarianceMode::full ? 1 : 0);
    for (std::size_t c : a.conv_channels) w.i32(static_cast<std::int64_t>(c));
    w.i32(static_cast<std::int64_t>(a.kernel));
    for (std::size_t s : a.strides) w.i32(static_cast<std::int64_t>(s));
    for (std::size_t p : a.paddings) w.i32(static_cast<std::int64_t>(p));
    w.i32(static_cast<std::int64_t>(a.hidden));
    w.i32(static_cast<std::int64_t>(model.parameters().size()));
    for (double p : model.parameters()) w.f64(p);
    if (!out) throw ConfigError("model file: write failed");
}

EncoderModel read_model(std::istream& in) {
    Reader r(in, "model file");
    std::array<char, 4> magic{};
    r.bytes(magic.data(), 4, "magic");
    if (std::memcmp(magic.data(), "MBDE", 4) != 0) r.fail("magic", "bad magic (expected MBDE)");
    const unsigned char version = r.u8("version");
    if (version != kModelFormatVersion) r.fail("version", "unsupported version " + std::to_string(version));

    EncoderArchitecture a;
    auto field = [&](const char* name) {
        const std::uint64_t at = r.offset();
        return positive(r, r.i32(name), name, at);
    };
    a.input_side = field("input_side");
    a.sources = field("sources");
    {
        const std::uint64_t at = r.offset();
        const std::int32_t mode = r.i32("covariance_mode");
        if (mode != 0 && mode != 1) {
            std::ostringstream msg;
            msg << "invalid covariance mode " << mode << " (field starts at byte offset " << at << ")";
            r.fail("covariance_mode", msg.str());
        }
        a.mode = mode == 1 ? CovarianceMode::full : CovarianceMode::diag;
    }
    for (auto& c : a.conv_channels) c = field("conv_channels");
    a.kernel = field("kernel");
    for (auto& s : a.strides) s = field("strides");
    for (auto& p : a.paddings) {
        const std::int32_t v = r.i32("paddings");
        if (v < 0) r.fail("paddings", "negative padding");
        p = static_cast<std::size_t>(v);
    }
    a.hidden = field("hidden");
    const std::uint64_t count_at = r.offset();
    const std::size_t count = field("parameter_count");
    try {
        a.validate();
    } catch (const ConfigError& e) {
        r.fail("architecture", e.what());
    }
    if (count != a.parameter_count()) {
        std::ostringstream msg;
        msg << "parameter count " << count << " does not match architecture (" << a.parameter_count()
            << ", field starts at byte offset " << count_at << ")";
        r.fail("parameter_count", msg.str());
    }
    std::vector<double> params(count);
    for (double& p : params) p = r.f64("parameters");
    r.expect_end();
    return EncoderModel(a, std::move(params));
}

void save_model(const std::filesystem::path& path, const EncoderModel& model) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot open " + path.string() + " for writing");
    write_model(out, model);
}

EncoderModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open model file " + path.string());
    return read_model(in);
}

void write_snapshots(std::ostream& out, const CMatrix& snapshots) {
    Writer w(out);
    w.bytes("DOAS", 4);
    w.u8(kSnapshotFormatVersion);
    w.i32(snapshots.rows());
    w.i32(snapshots.cols());
    for (Eigen::Index t = 0; t < snapshots.cols(); ++t) {
        for (Eigen::Index m = 0; m < snapshots.rows(); ++m) {
            w.f64(snapshots(m, t).real());
            w.f64(snapshots(m, t).imag());
        }
    }
    if (!out) throw ConfigError("snapshot file: write failed");
}

SnapshotBatch read_snapshots(std::istream& in) {
    Reader r(in, "snapshot file");
    std::array<char, 4> magic{};
    r.bytes(magic.data(), 4, "magic");
    if (std::memcmp(magic.data(), "DOAS", 4) != 0) r.fail("magic", "bad magic (expected DOAS)");
    const unsigned char version = r.u8("version");
    if (version != kSnapshotFormatVersion) r.fail("version", "unsupported version " + std::to_string(version));
    std::uint64_t at = r.offset();
    const std::size_t m = positive(r, r.i32("M"), "M", at);
    at = r.offset();
    const std::size_t n = positive(r, r.i32("N"), "N", at);
    SnapshotBatch batch;
    batch.snapshots.resize(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
    for (std::size_t t = 0; t < n; ++t) {
        for (std::size_t i = 0; i < m; ++i) {
            const double re = r.f64("snapshot value");
            const double im = r.f64("snapshot value");
            if (!std::isfinite(re) || !std::isfinite(im)) r.fail("snapshot value", "non-finite sample");
            batch.snapshots(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t)) = cdouble(re, im);
        }
    }
    r.expect_end();
    batch.sample_covariance = sample_covariance(batch.snapshots);
    return batch;
}

void save_snapshots(const std::filesystem::path& path, const CMatrix& snapshots) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot open " + path.string() + " for writing");
    write_snapshots(out, snapshots);
}

SnapshotBatch load_snapshots(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open snapshot file " + path.string());
    return read_snapshots(in);
}

}  // namespace mbdoa
