#pragma once

#include <string>

#include "ap/policy.hpp"

namespace ap {

// Policy checkpoint, binary little-endian:
//   magic "APCK" | u32 version | architecture name | i32 n_l | u8 map_enabled
//   | i32 map_h | i32 map_w | f64 center_x, center_y, range, sigma
//   | u32 param_count | per parameter: name, u32 ndim, u64 dims..., f64 data.
// Strings are a u32 byte length followed by the bytes. Loading rebuilds the
// policy from the stored layout and overwrites every parameter, so a loaded
// policy reproduces the saved one bit for bit.
inline constexpr uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::string& path, ActorCritic& policy);

ActorCritic load_checkpoint(const std::string& path);

}  // namespace ap
