#pragma once

#include <span>
#include <vector>

#include "b2u/autodiff.hpp"
#include "b2u/masking.hpp"
#include "b2u/tensor.hpp"

namespace b2u {

/// Full image assembled from the blind spots of a denoised volume.
struct MappedImage {
    Tensor image;
    /// Row-major (h * w) index of the layer that supplied each pixel.
    std::vector<int> provenance;
};

/// Pixel (r, c) of the result is pixel (r, c) of layer (r mod s, c mod s).
/// `layers` must hold s*s tensors of one shape, in MaskedVolume order.
MappedImage map_blind_spots(std::span<const Tensor> layers, MaskGridSpec spec);

/// Adjoint of map_blind_spots: routes each gradient pixel to the layer in
/// which that pixel is blind, zeros elsewhere.
std::vector<Tensor> mapper_backward_scatter(const Tensor& grad_out, MaskGridSpec spec);

namespace ops {

/// Graph form over an image-major stacked volume (n * s*s, c, h, w) -> (n, c, h, w),
/// as produced by make_volume_batch.
Var map_blind_spots(Graph& g, Var volume, MaskGridSpec spec);

}  // namespace ops

}  // namespace b2u
