#include "mbdoa/encoder.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>

#include "mbdoa/errors.hpp"

namespace mbdoa {

namespace {

std::atomic<std::uint64_t> g_stamp_counter{1};

std::uint64_t next_stamp() { return g_stamp_counter.fetch_add(1, std::memory_order_relaxed); }

struct Geometry2d {
    std::size_t cin, hin, cout, hout, k, stride, pad;
};

// Range of output indices o for which o*stride - pad + tap lands inside [0, n).
std::pair<std::size_t, std::size_t> valid_range(std::size_t n, std::size_t nout, std::size_t stride,
                                                std::size_t pad, std::size_t tap) {
    // need o*stride + tap >= pad and o*stride + tap - pad <= n - 1
    std::size_t lo = 0;
    if (tap < pad) lo = (pad - tap + stride - 1) / stride;
    const std::ptrdiff_t hi_num = static_cast<std::ptrdiff_t>(n) - 1 + static_cast<std::ptrdiff_t>(pad) -
                                  static_cast<std::ptrdiff_t>(tap);
    if (hi_num < 0) return {0, 0};
    const std::size_t hi = std::min(nout, static_cast<std::size_t>(hi_num) / stride + 1);
    return {lo, std::max(lo, hi)};
}

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;
using MutMap = Eigen::Map<RowMatrix>;

// Unfolds the input into a (cin*k*k) x (hout*hout) patch matrix; padding taps stay zero.
RowMatrix im2col(const Geometry2d& g, const double* in) {
    const std::size_t plane_out = g.hout * g.hout;
    RowMatrix col = RowMatrix::Zero(static_cast<Eigen::Index>(g.cin * g.k * g.k), static_cast<Eigen::Index>(plane_out));
    for (std::size_t c = 0; c < g.cin; ++c) {
        const double* src = in + c * g.hin * g.hin;
        for (std::size_t ky = 0; ky < g.k; ++ky) {
            const auto [y0, y1] = valid_range(g.hin, g.hout, g.stride, g.pad, ky);
            for (std::size_t kx = 0; kx < g.k; ++kx) {
                const auto [x0, x1] = valid_range(g.hin, g.hout, g.stride, g.pad, kx);
                double* dst = col.row(static_cast<Eigen::Index>((c * g.k + ky) * g.k + kx)).data();
                for (std::size_t y = y0; y < y1; ++y) {
                    const double* row = src + (y * g.stride + ky - g.pad) * g.hin;
                    for (std::size_t x = x0; x < x1; ++x) dst[y * g.hout + x] = row[x * g.stride + kx - g.pad];
                }
            }
        }
    }
    return col;
}

void col2im_add(const Geometry2d& g, const RowMatrix& col, double* din) {
    for (std::size_t c = 0; c < g.cin; ++c) {
        double* dst = din + c * g.hin * g.hin;
        for (std::size_t ky = 0; ky < g.k; ++ky) {
            const auto [y0, y1] = valid_range(g.hin, g.hout, g.stride, g.pad, ky);
            for (std::size_t kx = 0; kx < g.k; ++kx) {
                const auto [x0, x1] = valid_range(g.hin, g.hout, g.stride, g.pad, kx);
                const double* src = col.row(static_cast<Eigen::Index>((c * g.k + ky) * g.k + kx)).data();
                for (std::size_t y = y0; y < y1; ++y) {
                    double* row = dst + (y * g.stride + ky - g.pad) * g.hin;
                    for (std::size_t x = x0; x < x1; ++x) row[x * g.stride + kx - g.pad] += src[y * g.hout + x];
                }
            }
        }
    }
}

void conv_forward(const Geometry2d& g, const double* in, const double* weight, const double* bias, double* out) {
    const auto patches = static_cast<Eigen::Index>(g.cin * g.k * g.k);
    const auto plane_out = static_cast<Eigen::Index>(g.hout * g.hout);
    const auto cout = static_cast<Eigen::Index>(g.cout);
    const RowMatrix col = im2col(g, in);
    MutMap y(out, cout, plane_out);
    y.noalias() = ConstMap(weight, cout, patches) * col;
    y.colwise() += Eigen::Map<const Eigen::VectorXd>(bias, cout);
}

// din may be null (first layer).
void conv_backward(const Geometry2d& g, const double* in, const double* weight, const double* dout,
                   double* dweight, double* dbias, double* din) {
    const auto patches = static_cast<Eigen::Index>(g.cin * g.k * g.k);
    const auto plane_out = static_cast<Eigen::Index>(g.hout * g.hout);
    const auto cout = static_cast<Eigen::Index>(g.cout);
    const ConstMap dy(dout, cout, plane_out);
    Eigen::Map<Eigen::VectorXd>(dbias, cout) += dy.rowwise().sum();
    const RowMatrix col = im2col(g, in);
    MutMap(dweight, cout, patches).noalias() += dy * col.transpose();
    if (din) {
        const RowMatrix dcol = ConstMap(weight, cout, patches).transpose() * dy;
        col2im_add(g, dcol, din);
    }
}

std::size_t conv_out_side(std::size_t n, std::size_t k, std::size_t stride, std::size_t pad) {
    if (n + 2 * pad < k) return 0;
    return (n + 2 * pad - k) / stride + 1;
}

Geometry2d stage_geometry(const EncoderArchitecture& arch, std::size_t layer) {
    const auto sides = arch.spatial_sides();
    const std::size_t cin = layer == 0 ? 2 : arch.conv_channels[layer - 1];
    return {cin, sides[layer], arch.conv_channels[layer], sides[layer + 1], arch.kernel, arch.strides[layer],
            arch.paddings[layer]};
}

}  // namespace

EncoderArchitecture EncoderArchitecture::reference(std::size_t sources, CovarianceMode mode, std::size_t input_side) {
    EncoderArchitecture a;
    a.sources = sources;
    a.mode = mode;
    a.input_side = input_side;
    return a;
}

EncoderArchitecture EncoderArchitecture::desk(std::size_t sources, CovarianceMode mode, std::size_t input_side) {
    EncoderArchitecture a = reference(sources, mode, input_side);
    a.conv_channels = {16, 32, 64, 128};
    return a;
}

std::array<std::size_t, 5> EncoderArchitecture::spatial_sides() const {
    std::array<std::size_t, 5> sides{};
    sides[0] = input_side;
    for (std::size_t l = 0; l < 4; ++l) {
        sides[l + 1] = strides[l] == 0 ? 0 : conv_out_side(sides[l], kernel, strides[l], paddings[l]);
    }
    return sides;
}

std::size_t EncoderArchitecture::flat_features() const {
    const std::size_t side = spatial_sides()[4];
    return conv_channels[3] * side * side;
}

void EncoderArchitecture::validate() const {
    if (sources == 0) throw ConfigError("encoder: sources must be >= 1");
    if (input_side < 2) throw ConfigError("encoder: input side must be >= 2");
    if (kernel == 0 || hidden == 0) throw ConfigError("encoder: kernel and hidden size must be positive");
    for (std::size_t l = 0; l < 4; ++l) {
        if (conv_channels[l] == 0 || strides[l] == 0) {
            throw ConfigError("encoder: conv channels and strides must be positive");
        }
    }
    const auto sides = spatial_sides();
    for (std::size_t l = 1; l < 5; ++l) {
        if (sides[l] == 0) {
            std::ostringstream msg;
            msg << "encoder: conv stage " << l << " collapses a " << sides[l - 1] << "-wide feature map";
            throw ConfigError(msg.str());
        }
    }
}

std::size_t ParamBlock::size() const {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

std::vector<ParamBlock> parameter_manifest(const EncoderArchitecture& arch) {
    std::vector<ParamBlock> blocks;
    std::size_t offset = 0;
    auto add = [&](std::string name, std::vector<std::size_t> shape) {
        ParamBlock b{std::move(name), offset, std::move(shape)};
        offset += b.size();
        blocks.push_back(std::move(b));
    };
    std::size_t cin = 2;
    for (std::size_t l = 0; l < 4; ++l) {
        const std::string prefix = "conv" + std::to_string(l + 1);
        add(prefix + ".weight", {arch.conv_channels[l], cin, arch.kernel, arch.kernel});
        add(prefix + ".bias", {arch.conv_channels[l]});
        cin = arch.conv_channels[l];
    }
    add("hidden.weight", {arch.hidden, arch.flat_features()});
    add("hidden.bias", {arch.hidden});
    add("output.weight", {arch.head_dim(), arch.hidden});
    add("output.bias", {arch.head_dim()});
    return blocks;
}

std::size_t EncoderArchitecture::parameter_count() const {
    const auto blocks = parameter_manifest(*this);
    return blocks.back().offset + blocks.back().size();
}

EncoderModel::EncoderModel(EncoderArchitecture arch, std::vector<double> parameters)
    : arch_(arch), params_(std::move(parameters)), stamp_(next_stamp()) {
    arch_.validate();
    if (params_.size() != arch_.parameter_count()) {
        std::ostringstream msg;
        msg << "encoder: expected " << arch_.parameter_count() << " parameters, got " << params_.size();
        throw ConfigError(msg.str());
    }
}

std::span<double> EncoderModel::mutable_parameters() {
    stamp_ = next_stamp();
    return params_;
}

EncoderModel init_params(const EncoderArchitecture& arch, Rng& rng) {
    arch.validate();
    std::vector<double> params(arch.parameter_count(), 0.0);
    for (const ParamBlock& block : parameter_manifest(arch)) {
        if (block.shape.size() < 2) continue;  // bias
        std::size_t fan_in = 1;
        for (std::size_t d = 1; d < block.shape.size(); ++d) fan_in *= block.shape[d];
        std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
        for (std::size_t i = 0; i < block.size(); ++i) params[block.offset + i] = dist(rng);
    }
    return EncoderModel(arch, std::move(params));
}

EncoderOutput encoder_forward(const EncoderModel& model, const CMatrix& sample_cov) {
    const EncoderArchitecture& arch = model.architecture();
    const std::size_t m = arch.input_side;
    if (static_cast<std::size_t>(sample_cov.rows()) != m || static_cast<std::size_t>(sample_cov.cols()) != m) {
        std::ostringstream msg;
        msg << "encoder: input is " << sample_cov.rows() << "x" << sample_cov.cols() << ", architecture expects "
            << m << "x" << m;
        throw ConfigError(msg.str());
    }
    const auto blocks = parameter_manifest(arch);
    const double* p = model.parameters().data();

    EncoderOutput out;
    ForwardCache& cache = out.cache;
    cache.stamp = model.stamp();
    cache.input.resize(2 * m * m);
    for (std::size_t r = 0; r < m; ++r) {
        for (std::size_t c = 0; c < m; ++c) {
            const cdouble z = sample_cov(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
            cache.input[r * m + c] = z.real();
            cache.input[m * m + r * m + c] = z.imag();
        }
    }

    const double* x = cache.input.data();
    for (std::size_t l = 0; l < 4; ++l) {
        const Geometry2d g = stage_geometry(arch, l);
        auto& y = cache.conv_out[l];
        y.assign(g.cout * g.hout * g.hout, 0.0);
        conv_forward(g, x, p + blocks[2 * l].offset, p + blocks[2 * l + 1].offset, y.data());
        for (double& v : y) v = std::max(v, 0.0);
        x = y.data();
    }

    const std::size_t flat = arch.flat_features();
    const double* wh = p + blocks[8].offset;
    const double* bh = p + blocks[9].offset;
    cache.hidden.resize(arch.hidden);
    for (std::size_t o = 0; o < arch.hidden; ++o) {
        double acc = bh[o];
        const double* row = wh + o * flat;
        for (std::size_t i = 0; i < flat; ++i) acc += row[i] * x[i];
        cache.hidden[o] = std::max(acc, 0.0);
    }

    const std::size_t heads = arch.head_dim();
    const double* wo = p + blocks[10].offset;
    const double* bo = p + blocks[11].offset;
    cache.raw.resize(heads);
    for (std::size_t o = 0; o < heads; ++o) {
        double acc = bo[o];
        const double* row = wo + o * arch.hidden;
        for (std::size_t i = 0; i < arch.hidden; ++i) acc += row[i] * cache.hidden[i];
        cache.raw[o] = acc;
    }
    out.latent = apply_heads(arch.heads(), cache.raw);
    return out;
}

void encoder_backward_accumulate(const EncoderModel& model, const ForwardCache& cache,
                                 std::span<const double> raw_gradient, std::span<double> grad) {
    const EncoderArchitecture& arch = model.architecture();
    if (cache.stamp != model.stamp()) {
        throw ContractViolation("encoder_backward: forward cache does not belong to the current parameters");
    }
    if (raw_gradient.size() != arch.head_dim()) {
        throw ContractViolation("encoder_backward: head gradient dimension does not match the architecture");
    }
    if (grad.size() != model.parameters().size()) {
        throw ContractViolation("encoder_backward: gradient buffer has wrong length");
    }
    const auto blocks = parameter_manifest(arch);
    const double* p = model.parameters().data();
    double* gp = grad.data();

    // output layer
    const std::size_t heads = arch.head_dim();
    const double* wo = p + blocks[10].offset;
    std::vector<double> d_hidden(arch.hidden, 0.0);
    for (std::size_t o = 0; o < heads; ++o) {
        const double go = raw_gradient[o];
        if (go == 0.0) continue;
        gp[blocks[11].offset + o] += go;
        double* gw = gp + blocks[10].offset + o * arch.hidden;
        const double* row = wo + o * arch.hidden;
        for (std::size_t i = 0; i < arch.hidden; ++i) {
            gw[i] += go * cache.hidden[i];
            d_hidden[i] += go * row[i];
        }
    }
    for (std::size_t i = 0; i < arch.hidden; ++i) {
        if (cache.hidden[i] <= 0.0) d_hidden[i] = 0.0;
    }

    // hidden layer
    const std::size_t flat = arch.flat_features();
    const double* features = cache.conv_out[3].data();
    const double* wh = p + blocks[8].offset;
    std::vector<double> d_feat(flat, 0.0);
    for (std::size_t o = 0; o < arch.hidden; ++o) {
        const double go = d_hidden[o];
        if (go == 0.0) continue;
        gp[blocks[9].offset + o] += go;
        double* gw = gp + blocks[8].offset + o * flat;
        const double* row = wh + o * flat;
        for (std::size_t i = 0; i < flat; ++i) {
            gw[i] += go * features[i];
            d_feat[i] += go * row[i];
        }
    }

    // conv stack
    std::vector<double> d_out = std::move(d_feat);
    for (std::size_t l = 4; l-- > 0;) {
        const Geometry2d g = stage_geometry(arch, l);
        const auto& y = cache.conv_out[l];
        for (std::size_t i = 0; i < d_out.size(); ++i) {
            if (y[i] <= 0.0) d_out[i] = 0.0;
        }
        const double* in = l == 0 ? cache.input.data() : cache.conv_out[l - 1].data();
        std::vector<double> d_in;
        if (l > 0) d_in.assign(g.cin * g.hin * g.hin, 0.0);
        conv_backward(g, in, p + blocks[2 * l].offset, d_out.data(), gp + blocks[2 * l].offset,
                      gp + blocks[2 * l + 1].offset, l > 0 ? d_in.data() : nullptr);
        d_out = std::move(d_in);
    }
}

std::vector<double> encoder_backward(const EncoderModel& model, const ForwardCache& cache,
                                     const LatentGradient& head_gradient) {
    std::vector<double> grad(model.parameters().size(), 0.0);
    const std::vector<double> raw = head_gradient.flatten();
    encoder_backward_accumulate(model, cache, raw, grad);
    return grad;
}

}  // namespace mbdoa
