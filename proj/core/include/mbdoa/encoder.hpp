#pragma once

// Convolutional encoder: sample covariance (real/imag channels) -> raw head
// outputs -> LatentParams. Four conv+ReLU stages, one hidden linear+ReLU layer,
// and a linear output layer sized by the head layout.

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mbdoa/heads.hpp"
#include "mbdoa/linalg.hpp"
#include "mbdoa/objective.hpp"
#include "mbdoa/rng.hpp"

namespace mbdoa {

struct EncoderArchitecture {
    std::array<std::size_t, 4> conv_channels{64, 128, 256, 512};
    std::size_t kernel = 3;
    std::array<std::size_t, 4> strides{1, 2, 2, 2};
    std::array<std::size_t, 4> paddings{1, 1, 1, 0};
    std::size_t hidden = 512;
    std::size_t sources = 3;
    std::size_t input_side = 9;
    CovarianceMode mode = CovarianceMode::diag;

    /// Full-size network (64/128/256/512 channels, hidden 512).
    static EncoderArchitecture reference(std::size_t sources, CovarianceMode mode, std::size_t input_side = 9);
    /// Reduced network (16/32/64/128 channels) for quick runs.
    static EncoderArchitecture desk(std::size_t sources, CovarianceMode mode, std::size_t input_side = 9);

    HeadLayout heads() const { return {sources, mode}; }
    std::size_t head_dim() const { return heads().size(); }
    /// Spatial side length at the input and after each conv stage.
    std::array<std::size_t, 5> spatial_sides() const;
    std::size_t flat_features() const;
    std::size_t parameter_count() const;
    /// Throws ConfigError if any stage collapses the feature map or a field is zero.
    void validate() const;

    bool operator==(const EncoderArchitecture&) const = default;
};

struct ParamBlock {
    std::string name;
    std::size_t offset = 0;
    std::vector<std::size_t> shape;

    std::size_t size() const;
};

/// Deterministic parameter layout: conv{1..4}.{weight,bias}, hidden.{weight,bias},
/// output.{weight,bias}. Conv weights are [out][in][k][k], linear weights [out][in].
std::vector<ParamBlock> parameter_manifest(const EncoderArchitecture& arch);

class EncoderModel {
public:
    EncoderModel() = default;
    EncoderModel(EncoderArchitecture arch, std::vector<double> parameters);

    const EncoderArchitecture& architecture() const { return arch_; }
    std::span<const double> parameters() const { return params_; }
    /// Mutable access; any forward cache taken before this call becomes stale.
    std::span<double> mutable_parameters();
    std::uint64_t stamp() const { return stamp_; }

private:
    EncoderArchitecture arch_;
    std::vector<double> params_;
    std::uint64_t stamp_ = 0;
};

/// Activations retained for the backward pass.
struct ForwardCache {
    std::uint64_t stamp = 0;
    std::vector<double> input;                    // 2 x M x M
    std::array<std::vector<double>, 4> conv_out;  // post-ReLU
    std::vector<double> hidden;                   // post-ReLU
    std::vector<double> raw;                      // head inputs
};

struct EncoderOutput {
    LatentParams latent;
    ForwardCache cache;
};

/// He-normal weights N(0, 2/fan_in), zero biases.
EncoderModel init_params(const EncoderArchitecture& arch, Rng& rng);

EncoderOutput encoder_forward(const EncoderModel& model, const CMatrix& sample_cov);

/// Gradient of (loss o heads o network) with respect to all parameters, given
/// the loss gradient at the raw head coordinates.
std::vector<double> encoder_backward(const EncoderModel& model, const ForwardCache& cache,
                                     const LatentGradient& head_gradient);

/// Same, accumulating into `grad` (length parameter_count()).
void encoder_backward_accumulate(const EncoderModel& model, const ForwardCache& cache,
                                 std::span<const double> raw_gradient, std::span<double> grad);

}  // namespace mbdoa
