#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "b2u/tensor.hpp"

namespace b2u {

/// Grayscale (P5) or RGB (P6) netpbm image with values in [0, 1].
struct ImageFile {
    Tensor pixels;  ///< (1, channels, h, w)
    int bit_depth = 8;

    int channels() const noexcept { return pixels.shape().c; }
};

/// Binary PGM/PPM with maxval 255 or 65535 (16-bit samples are big-endian).
ImageFile read_image(const std::filesystem::path& path);
ImageFile decode_netpbm(const std::vector<std::uint8_t>& bytes);

/// Clamps to [0, 1] and quantizes as round(v * (2^depth - 1)).
void write_image(const std::filesystem::path& path, const ImageFile& image);
std::vector<std::uint8_t> encode_netpbm(const ImageFile& image);

/// size x size crop at a seeded uniform offset.
Tensor crop_patch(const Tensor& image, int size, std::uint64_t seed);

struct DatasetManifest {
    std::filesystem::path root;
    std::vector<std::string> entries;  ///< as written, relative to root

    std::filesystem::path resolve(std::size_t i) const { return root / entries.at(i); }
    std::size_t size() const noexcept { return entries.size(); }
};

/// Newline-separated paths relative to the manifest's directory; '#' starts a
/// comment line, blank lines are skipped. Every missing file is reported in
/// one IoError.
DatasetManifest load_manifest(const std::filesystem::path& path);

}  // namespace b2u
