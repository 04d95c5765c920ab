#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "b2u/tensor.hpp"

namespace b2u {

/// Seeded synthetic image in [0.1, 0.9]: a few oriented sinusoids plus
/// soft-edged half-plane steps, so it has both smooth shading and edges.
Tensor make_texture(int height, int width, int channels, std::uint64_t seed);

/// `count` textures with seeds derived from (seed, index).
std::vector<Tensor> make_texture_set(int count, int size, int channels, std::uint64_t seed);

/// Writes tex_XXXX.pgm/.ppm files plus manifest.txt into `dir`; returns the manifest path.
std::filesystem::path write_texture_dataset(const std::filesystem::path& dir, int count, int size,
                                            int channels, std::uint64_t seed);

}  // namespace b2u
