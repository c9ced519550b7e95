#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "maskgae/dense.hpp"

namespace maskgae::num {

// Binary little-endian tensor container:
//   magic "MGAE", version u32, then per tensor:
//   name length (u32), UTF-8 name, rank (u32), dims (u64 each), raw f32 data.
// Tensors are read until end of file.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_tensors(const std::string& path,
                  const std::vector<std::pair<std::string, const DenseMatrix*>>& tensors);

std::vector<std::pair<std::string, DenseMatrix>> load_tensors(const std::string& path);

// FNV-1a over a byte buffer, rendered as 16 hex digits. Used for config and
// checkpoint digests.
std::string fnv1a_hex(const void* data, std::size_t len);
std::string digest_file(const std::string& path);
std::string digest_string(const std::string& s);

} // namespace maskgae::num
