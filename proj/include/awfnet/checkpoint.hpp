#pragma once

#include <string>

#include "awfnet/params.hpp"

namespace awfnet {

/// Bit-exact checkpoint format:
///   magic "AWFN1" (5 bytes)
///   u32 entry count
///   per entry: u32 name length, name bytes, u32 ndim, u32 dims[ndim]
///   payload: every entry's values as little-endian float32, manifest order
///   u64 FNV-1a checksum of the payload bytes
/// All integers little-endian. Parameters and buffers (running statistics)
/// are both persisted.
void save_checkpoint(const std::string& path, const Registry<float>& reg);

/// Validates magic/manifest/checksum before touching the registry: a corrupt
/// or incompatible file never yields a partial load.
void load_checkpoint(const std::string& path, Registry<float>& reg);

}  // namespace awfnet
