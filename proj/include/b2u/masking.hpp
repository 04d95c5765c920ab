#pragma once

#include <cstdint>
#include <vector>

#include "b2u/tensor.hpp"

namespace b2u {

/// Cell side length of the blind-spot grid.
struct MaskGridSpec {
    int s = 2;

    int layers() const noexcept { return s * s; }
    /// Layer whose blind set contains pixel (row, col).
    int layer_of(int row, int col) const noexcept { return (row % s) * s + (col % s); }
    /// Throws ValueError when s < 2 or the image is smaller than one cell.
    void validate(int h, int w) const;
};

/// The s*s masked copies of one image. Layer l = i*s + j hides every pixel
/// (r, c) with r mod s == i and c mod s == j.
struct MaskedVolume {
    MaskGridSpec spec;
    Shape origin;  ///< (1, c, h, w)
    std::vector<Tensor> layers;

    bool is_blind(int layer, int row, int col) const noexcept {
        return spec.layer_of(row, col) == layer;
    }
    /// Layers stacked along the batch axis, layer order.
    Tensor stacked() const;
};

/// Normalized mean of the in-bounds 3x3 neighbours of every pixel, centre
/// excluded, per channel. Accepts a batch; each image is handled separately.
Tensor interpolate_neighbors(const Tensor& image);

MaskedVolume make_global_masked_volume(const Tensor& image, MaskGridSpec spec);

/// Masked volumes for a whole batch (n, c, h, w), stacked image-major:
/// output index b * s*s + layer.
Tensor make_volume_batch(const Tensor& batch, MaskGridSpec spec);

struct BlindPixel {
    int row = 0;
    int col = 0;
    bool operator==(const BlindPixel&) const = default;
};

struct RandomMaskedImage {
    Tensor image;                   ///< masked copy of the input
    std::vector<BlindPixel> blind;  ///< one per cell, row-major cell order
    Tensor mask;                    ///< (1, 1, h, w), 1 at blind pixels
};

/// One uniformly chosen blind spot per s x s cell. Requires h and w divisible by s.
RandomMaskedImage make_random_masked_image(const Tensor& image, MaskGridSpec spec,
                                           std::uint64_t seed);

}  // namespace b2u
