#pragma once

// Checkpoint container, all integers little-endian:
//
//   "B2UCKPT1"                         8 bytes magic
//   u32 format_version
//   u32 entry_count
//   entry_count x {
//     u32 name_length, name bytes (UTF-8)
//     u32 rank, rank x u32 dims
//     prod(dims) x f32 payload
//   }
//   u64 FNV-1a of every preceding byte
//
// Entries are written in lexicographic name order. Scalars are 1-element
// rank-1 tensors under reserved "__" names; the 64-bit config digest is split
// into four 16-bit halves stored exactly as floats.

#include <cstdint>
#include <filesystem>
#include <vector>

#include "b2u/adam.hpp"
#include "b2u/unet.hpp"

namespace b2u {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    std::uint32_t format_version = kCheckpointVersion;
    NetConfig net_config;
    NetworkParams params;
    AdamState adam;
    int epoch = 0;  ///< completed epochs
    std::uint64_t trainer_config_digest = 0;
};

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// FNV-1a over the serialized bytes; identifies a checkpoint in reports.
std::uint64_t checkpoint_digest(const Checkpoint& ckpt);

}  // namespace b2u
