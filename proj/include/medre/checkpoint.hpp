// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "medre/optim.hpp"

namespace medre {

/// Binary container:
///
///   u8      format version (currently 1)
///   8 bytes magic "MEDRECKP"
///   u64     config length, then that many bytes of UTF-8 JSON
///   u64     parameter count
///   per parameter:
///     u32 name length, name bytes
///     u32 rank, rank x u64 dims
///     numel x float64 payload
///
/// All integers and floats are little-endian.
inline constexpr std::uint8_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  Shape shape;
  std::vector<double> values;
};

struct Checkpoint {
  nlohmann::json config;
  std::vector<NamedTensor> params;
};

std::string encode_checkpoint(const nlohmann::json &config,
                              const ParamStore &params);
Checkpoint decode_checkpoint(std::string_view bytes);

void write_checkpoint(const std::filesystem::path &path,
                      const nlohmann::json &config, const ParamStore &params);
Checkpoint read_checkpoint(const std::filesystem::path &path);

/// Copies checkpoint values into an existing store; every name and shape
/// must match.
void load_into(const Checkpoint &ckpt, ParamStore &params);

} // namespace medre
