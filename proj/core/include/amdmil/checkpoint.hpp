#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "amdmil/matrix.hpp"

namespace amdmil {

/// Named tensors as stored in an AMDC checkpoint.
///
/// Layout (little-endian): "AMDC", u32 version = 1, u32 tensor count, then
/// per tensor u16 name length, UTF-8 name, u32 rows, u32 cols, rows*cols
/// float32 values in row-major order.
using NamedTensors = std::vector<std::pair<std::string, Matrix>>;

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<unsigned char> encode_checkpoint(const NamedTensors& tensors);
NamedTensors decode_checkpoint(const std::vector<unsigned char>& bytes);

void save_checkpoint(const NamedTensors& tensors, const std::filesystem::path& path);
NamedTensors load_checkpoint(const std::filesystem::path& path);

}  // namespace amdmil
