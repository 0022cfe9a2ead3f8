#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ctxmotion/motion_model.hpp"

namespace ctxmotion {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Layout, all integers little-endian:
//   "CTXMCKPT" | u32 format_version | u64 n | n bytes of config JSON
//   | u64 block_count | per block: u64 n | name | u64 rank | u64 dims[rank] | f64 values
std::vector<std::uint8_t> serialize_checkpoint(const MotionModel& model);
/// Throws VersionError on a bad magic, unknown version, truncation or a
/// config/parameter mismatch.
MotionModel deserialize_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const std::string& path, const MotionModel& model);
/// Throws ResourceError when the file cannot be opened.
MotionModel load_checkpoint(const std::string& path);

}  // namespace ctxmotion
