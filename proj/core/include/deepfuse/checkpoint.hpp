#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "deepfuse/network.hpp"

namespace deepfuse {

// Layout (all little-endian):
//   0  magic "DFNC"
//   4  u32 format version
//   8  u32 kernels[5], u32 channels[4], u32 merge mode
//  48  u64 seed
//  56  u64 parameter count N
//  64  f32 parameters[N] (NetworkParams::flatten order)
//  ..  u32 CRC-32 of every preceding byte
inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr std::size_t kCheckpointHeaderBytes = 64;
inline constexpr std::size_t kCheckpointTrailerBytes = 4;

std::vector<std::uint8_t> encode_checkpoint(const NetworkParams& params);
NetworkParams decode_checkpoint(std::span<const std::uint8_t> bytes);

/// Writes atomically (temporary file + rename). Throws CheckpointError(Io) on failure.
void save_checkpoint(const NetworkParams& params, const std::filesystem::path& path);
NetworkParams load_checkpoint(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace deepfuse
