#include "b2u/masking.hpp"

#include "b2u/error.hpp"
#include "b2u/rng.hpp"

namespace b2u {

void MaskGridSpec::validate(int h, int w) const {
    if (s < 2) throw ValueError("mask grid cell size s must be >= 2, got " + std::to_string(s));
    if (h < s || w < s) {
        throw ValueError("image " + std::to_string(h) + "x" + std::to_string(w) +
                         " is smaller than one " + std::to_string(s) + "x" + std::to_string(s) +
                         " cell");
    }
}

Tensor MaskedVolume::stacked() const { return concat_batch(layers); }

Tensor interpolate_neighbors(const Tensor& image) {
    const Shape s = image.shape();
    if (s.h < 2) throw ShapeError("h", "interpolate_neighbors needs height >= 2, got " + s.str());
    if (s.w < 2) throw ShapeError("w", "interpolate_neighbors needs width >= 2, got " + s.str());
    Tensor out(s);
    for (int n = 0; n < s.n; ++n)
        for (int c = 0; c < s.c; ++c)
            for (int y = 0; y < s.h; ++y)
                for (int x = 0; x < s.w; ++x) {
                    float acc = 0.0f;
                    int count = 0;
                    for (int dy = -1; dy <= 1; ++dy) {
                        const int yy = y + dy;
                        if (yy < 0 || yy >= s.h) continue;
                        for (int dx = -1; dx <= 1; ++dx) {
                            const int xx = x + dx;
                            if ((dy == 0 && dx == 0) || xx < 0 || xx >= s.w) continue;
                            acc += image.at(n, c, yy, xx);
                            ++count;
                        }
                    }
                    out.at(n, c, y, x) = acc / static_cast<float>(count);
                }
    return out;
}

MaskedVolume make_global_masked_volume(const Tensor& image, MaskGridSpec spec) {
    const Shape s = image.shape();
    if (s.n != 1) throw ShapeError("n", "make_global_masked_volume expects one image, got " + s.str());
    spec.validate(s.h, s.w);
    const Tensor fill = interpolate_neighbors(image);
    MaskedVolume vol;
    vol.spec = spec;
    vol.origin = s;
    vol.layers.reserve(static_cast<std::size_t>(spec.layers()));
    for (int layer = 0; layer < spec.layers(); ++layer) {
        const int i = layer / spec.s;
        const int j = layer % spec.s;
        Tensor masked = image;
        for (int c = 0; c < s.c; ++c)
            for (int y = i; y < s.h; y += spec.s)
                for (int x = j; x < s.w; x += spec.s) masked.at(0, c, y, x) = fill.at(0, c, y, x);
        vol.layers.push_back(std::move(masked));
    }
    return vol;
}

Tensor make_volume_batch(const Tensor& batch, MaskGridSpec spec) {
    std::vector<Tensor> parts;
    parts.reserve(static_cast<std::size_t>(batch.shape().n * spec.layers()));
    for (int b = 0; b < batch.shape().n; ++b) {
        MaskedVolume vol = make_global_masked_volume(batch.batch_slice(b, 1), spec);
        for (auto& layer : vol.layers) parts.push_back(std::move(layer));
    }
    return concat_batch(parts);
}

RandomMaskedImage make_random_masked_image(const Tensor& image, MaskGridSpec spec,
                                           std::uint64_t seed) {
    const Shape s = image.shape();
    if (s.n != 1) throw ShapeError("n", "make_random_masked_image expects one image, got " + s.str());
    spec.validate(s.h, s.w);
    if (s.h % spec.s != 0) {
        throw ShapeError("h", "height " + std::to_string(s.h) + " not divisible by s=" +
                                  std::to_string(spec.s));
    }
    if (s.w % spec.s != 0) {
        throw ShapeError("w", "width " + std::to_string(s.w) + " not divisible by s=" +
                                  std::to_string(spec.s));
    }
    const Tensor fill = interpolate_neighbors(image);
    RandomMaskedImage out{image, {}, Tensor({1, 1, s.h, s.w})};
    Rng rng(seed);
    const auto cells = static_cast<std::uint64_t>(spec.s) * spec.s;
    for (int cy = 0; cy < s.h; cy += spec.s) {
        for (int cx = 0; cx < s.w; cx += spec.s) {
            const auto pick = static_cast<int>(rng.below(cells));
            const BlindPixel p{cy + pick / spec.s, cx + pick % spec.s};
            out.blind.push_back(p);
            out.mask.at(0, 0, p.row, p.col) = 1.0f;
            for (int c = 0; c < s.c; ++c) out.image.at(0, c, p.row, p.col) = fill.at(0, c, p.row, p.col);
        }
    }
    return out;
}

}  // namespace b2u
