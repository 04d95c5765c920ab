#include "b2u/unet.hpp"

#include <cmath>

#include "b2u/error.hpp"
#include "b2u/rng.hpp"

namespace b2u {

namespace {

int stage_width(const NetConfig& cfg, int stage) { return cfg.base_channels << stage; }

}  // namespace

void NetConfig::validate() const {
    if (in_channels < 1) throw ValueError("in_channels must be >= 1");
    if (base_channels < 4) throw ValueError("base_channels must be >= 4");
    if (depth < 1) throw ValueError("depth must be >= 1");
    if (depth > 8) throw ValueError("depth must be <= 8");
    if (!(leaky_slope >= 0.0f && leaky_slope < 1.0f)) throw ValueError("leaky_slope must be in [0, 1)");
}

std::vector<ConvLayerSpec> unet_layers(const NetConfig& cfg) {
    cfg.validate();
    std::vector<ConvLayerSpec> layers;
    int channels = cfg.in_channels;
    for (int k = 0; k < cfg.depth; ++k) {
        const std::string stage = "enc" + std::to_string(k);
        layers.push_back({stage + ".conv0", channels, stage_width(cfg, k), 3});
        layers.push_back({stage + ".conv1", stage_width(cfg, k), stage_width(cfg, k), 3});
        channels = stage_width(cfg, k);
    }
    for (int k = cfg.depth - 1; k >= 0; --k) {
        const std::string stage = "dec" + std::to_string(k);
        layers.push_back({stage + ".conv0", channels + stage_width(cfg, k), stage_width(cfg, k), 3});
        layers.push_back({stage + ".conv1", stage_width(cfg, k), stage_width(cfg, k), 3});
        channels = stage_width(cfg, k);
    }
    layers.push_back({"head.conv0", channels, cfg.in_channels, 1});
    return layers;
}

NetworkParams build_unet(const NetConfig& cfg, std::uint64_t seed) {
    NetworkParams params;
    Rng rng(seed);
    const double gain = 1.0 + static_cast<double>(cfg.leaky_slope) * cfg.leaky_slope;
    for (const auto& layer : unet_layers(cfg)) {
        Tensor w({layer.c_out, layer.c_in, layer.kernel, layer.kernel});
        const double fan_in = static_cast<double>(layer.c_in) * layer.kernel * layer.kernel;
        const double bound = std::sqrt(6.0 / (gain * fan_in));
        for (float& v : w.data()) v = static_cast<float>(rng.uniform(-bound, bound));
        params[layer.name + ".weight"] = std::move(w);
        params[layer.name + ".bias"] = Tensor({1, layer.c_out, 1, 1});
    }
    return params;
}

std::size_t parameter_count(const NetworkParams& params) {
    std::size_t n = 0;
    for (const auto& [name, t] : params) n += t.numel();
    return n;
}

std::map<std::string, Var> register_parameters(Graph& g, const NetworkParams& params) {
    std::map<std::string, Var> handles;
    for (const auto& [name, t] : params) handles[name] = g.parameter(name, t);
    return handles;
}

Var unet_forward(Graph& g, const NetConfig& cfg, const std::map<std::string, Var>& params,
                 Var input, bool track_gradients) {
    cfg.validate();
    const Shape s = g.value(input).shape();
    if (s.c != cfg.in_channels) {
        throw ShapeError("c", "network expects " + std::to_string(cfg.in_channels) +
                                  " channels, input has " + std::to_string(s.c));
    }
    const int mult = cfg.spatial_multiple();
    if (s.h % mult != 0) {
        throw ShapeError("h", "height " + std::to_string(s.h) + " must be a multiple of " +
                                  std::to_string(mult));
    }
    if (s.w % mult != 0) {
        throw ShapeError("w", "width " + std::to_string(s.w) + " must be a multiple of " +
                                  std::to_string(mult));
    }

    // Untracked runs see the parameters as plain constants.
    std::map<std::string, Var> local;
    auto param = [&](const std::string& name) -> Var {
        auto it = params.find(name);
        if (it == params.end()) throw ValueError("missing network parameter '" + name + "'");
        if (track_gradients) return it->second;
        auto [pos, inserted] = local.try_emplace(name);
        if (inserted) pos->second = g.constant(g.value(it->second));
        return pos->second;
    };
    auto conv = [&](Var x, const std::string& layer, int padding) {
        return ops::conv2d(g, x, param(layer + ".weight"), param(layer + ".bias"), 1, padding);
    };
    auto conv_act = [&](Var x, const std::string& layer) {
        return ops::leaky_relu(g, conv(x, layer, 1), cfg.leaky_slope);
    };

    Var x = track_gradients ? input : ops::detach(g, input);
    std::vector<Var> skips;
    for (int k = 0; k < cfg.depth; ++k) {
        const std::string stage = "enc" + std::to_string(k);
        x = conv_act(x, stage + ".conv0");
        x = conv_act(x, stage + ".conv1");
        skips.push_back(x);
        x = ops::avg_pool2d(g, x, 2);
    }
    for (int k = cfg.depth - 1; k >= 0; --k) {
        const std::string stage = "dec" + std::to_string(k);
        x = ops::nearest_upsample(g, x, 2);
        x = ops::concat_channels(g, x, skips[static_cast<std::size_t>(k)]);
        x = conv_act(x, stage + ".conv0");
        x = conv_act(x, stage + ".conv1");
    }
    x = conv(x, "head.conv0", 0);
    return track_gradients ? x : ops::detach(g, x);
}

Tensor unet_forward(const NetConfig& cfg, const NetworkParams& params, const Tensor& input) {
    Graph g(false);
    std::map<std::string, Var> handles;
    for (const auto& [name, t] : params) handles[name] = g.constant(t);
    return g.value(unet_forward(g, cfg, handles, g.constant(input), false));
}

}  // namespace b2u
