#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "adapto/model.hpp"

namespace adapto {

/// Little-endian layout: "AVCK", u32 version, then for every registry entry
/// u32 name length, name bytes, u32 rank (4), u32 x rank dims, f64 payload.
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> encode_checkpoint(const Model& model);
void save_checkpoint(const Model& model, const std::string& path);

/// Overwrites the model's tensors in place. Names, order and shapes must
/// match the model's registry; raises FormatError otherwise.
void decode_checkpoint(Model& model, const std::vector<std::uint8_t>& bytes);
void load_checkpoint(Model& model, const std::string& path);

}  // namespace adapto
