#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "b2u/autodiff.hpp"
#include "b2u/tensor.hpp"

namespace b2u {

struct NetConfig {
    int in_channels = 1;
    int base_channels = 16;
    int depth = 2;
    float leaky_slope = 0.1f;

    void validate() const;
    /// Height and width must be multiples of this.
    int spatial_multiple() const noexcept { return 1 << depth; }
    bool operator==(const NetConfig&) const = default;
};

/// One convolution of the U-Net, in execution order.
struct ConvLayerSpec {
    std::string name;  ///< stage.layer prefix, e.g. "enc0.conv1"
    int c_in = 0;
    int c_out = 0;
    int kernel = 3;

    std::size_t parameter_count() const noexcept {
        return static_cast<std::size_t>(c_out) * c_in * kernel * kernel + c_out;
    }
};

/// Parameters keyed "<stage>.<layer>.weight" / "<stage>.<layer>.bias".
using NetworkParams = std::map<std::string, Tensor>;

/// Layer list of the micro U-Net.
///
/// Encoder stage k (k < depth): two 3x3 convs to base*2^k channels, each
/// followed by leaky-relu, output kept as skip, then 2x2 average pooling.
/// Decoder stage k (from depth-1 down to 0): nearest x2 upsample, concat with
/// skip k, two 3x3 convs + leaky-relu to base*2^k channels.
/// Head: 1x1 conv back to in_channels, no activation.
std::vector<ConvLayerSpec> unet_layers(const NetConfig& config);

/// Fan-in scaled uniform init, bound sqrt(6 / ((1 + slope^2) fan_in)); biases zero.
NetworkParams build_unet(const NetConfig& config, std::uint64_t seed);

std::size_t parameter_count(const NetworkParams& params);

/// Register every tensor of `params` as a named graph parameter.
std::map<std::string, Var> register_parameters(Graph& g, const NetworkParams& params);

/// Run the denoiser on `input` (n, in_channels, h, w). With `track_gradients`
/// false the parameters enter as constants and the result is detached.
Var unet_forward(Graph& g, const NetConfig& config, const std::map<std::string, Var>& params,
                 Var input, bool track_gradients);

/// Gradient-free convenience form.
Tensor unet_forward(const NetConfig& config, const NetworkParams& params, const Tensor& input);

}  // namespace b2u
