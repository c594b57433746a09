#pragma once

#include "gibbs/nn/network.hpp"

#include <filesystem>

namespace gibbs::nn {

constexpr std::uint32_t kCheckpointVersion = 1;

/// Binary layout: "GIBBSCKP", u32 version, u32 param count, then per param
/// u32 name length, name, u32 rank, u64 dims, u8 has_mask, f64 values, int8 mask.
/// All integers and floats are little-endian.
void save_checkpoint(Network& net, const std::filesystem::path& path);
/// Parameter names and shapes must match the network exactly.
void load_checkpoint(Network& net, const std::filesystem::path& path);

}  // namespace gibbs::nn
