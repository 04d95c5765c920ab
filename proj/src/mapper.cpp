#include "b2u/mapper.hpp"

#include "b2u/error.hpp"

namespace b2u {

MappedImage map_blind_spots(std::span<const Tensor> layers, MaskGridSpec spec) {
    if (spec.s < 2) throw ValueError("mask grid cell size s must be >= 2");
    if (layers.size() != static_cast<std::size_t>(spec.layers())) {
        throw ShapeError("layers", "expected " + std::to_string(spec.layers()) + " layers, got " +
                                       std::to_string(layers.size()));
    }
    const Shape s = layers.front().shape();
    for (const auto& l : layers) require_same_shape(s, l.shape(), "map_blind_spots");
    MappedImage out{Tensor(s), std::vector<int>(s.plane())};
    for (int y = 0; y < s.h; ++y)
        for (int x = 0; x < s.w; ++x) {
            const int layer = spec.layer_of(y, x);
            out.provenance[static_cast<std::size_t>(y) * s.w + x] = layer;
            const Tensor& src = layers[static_cast<std::size_t>(layer)];
            for (int n = 0; n < s.n; ++n)
                for (int c = 0; c < s.c; ++c) out.image.at(n, c, y, x) = src.at(n, c, y, x);
        }
    return out;
}

std::vector<Tensor> mapper_backward_scatter(const Tensor& grad_out, MaskGridSpec spec) {
    if (spec.s < 2) throw ValueError("mask grid cell size s must be >= 2");
    const Shape s = grad_out.shape();
    std::vector<Tensor> out(static_cast<std::size_t>(spec.layers()), Tensor(s));
    for (int n = 0; n < s.n; ++n)
        for (int c = 0; c < s.c; ++c)
            for (int y = 0; y < s.h; ++y)
                for (int x = 0; x < s.w; ++x)
                    out[static_cast<std::size_t>(spec.layer_of(y, x))].at(n, c, y, x) =
                        grad_out.at(n, c, y, x);
    return out;
}

namespace ops {

Var map_blind_spots(Graph& g, Var volume, MaskGridSpec spec) {
    if (spec.s < 2) throw ValueError("mask grid cell size s must be >= 2");
    const Shape vs = g.value(volume).shape();
    const int layers = spec.layers();
    if (vs.n % layers != 0) {
        throw ShapeError("n", "volume batch " + std::to_string(vs.n) + " is not a multiple of " +
                                  std::to_string(layers) + " layers");
    }
    const Shape os{vs.n / layers, vs.c, vs.h, vs.w};
    const Tensor& v = g.value(volume);
    Tensor out(os);
    for (int b = 0; b < os.n; ++b)
        for (int c = 0; c < os.c; ++c)
            for (int y = 0; y < os.h; ++y)
                for (int x = 0; x < os.w; ++x)
                    out.at(b, c, y, x) = v.at(b * layers + spec.layer_of(y, x), c, y, x);
    return g.record("map_blind_spots", {volume}, std::move(out),
                    [spec, os, layers](const BackwardContext& ctx) {
                        Tensor& dv = *ctx.input_grads[0];
                        for (int b = 0; b < os.n; ++b)
                            for (int c = 0; c < os.c; ++c)
                                for (int y = 0; y < os.h; ++y)
                                    for (int x = 0; x < os.w; ++x)
                                        dv.at(b * layers + spec.layer_of(y, x), c, y, x) +=
                                            ctx.grad_out.at(b, c, y, x);
                    });
}

}  // namespace ops

}  // namespace b2u
