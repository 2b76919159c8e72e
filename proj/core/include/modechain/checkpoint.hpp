#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "modechain/lstm.hpp"

namespace modechain {

// Checkpoint layout (little-endian):
//   "MRC1" | u32 vocab_size | u32 embed_dim | u32 hidden_size | u32 num_layers
//   | u64 seed | u64 step | tensors as f64, row-major, canonical order
//   (see LstmParams::for_each_tensor) | u64 FNV-1a checksum of all prior bytes
struct Checkpoint {
  LstmParams params;
  std::uint64_t seed = 0;
  std::uint64_t step = 0;
};

std::vector<unsigned char> encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(std::span<const unsigned char> bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace modechain
