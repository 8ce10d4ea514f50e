#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "veridip/nn.hpp"

namespace veridip {

// Model file layout, all little-endian:
//   magic "VDIP" | version u16 | activation u8 (0=relu, 1=tanh) |
//   layer count u16 | layer_dims u32[] |
//   per layer: weights row-major f64[], then biases f64[] |
//   CRC32 (zlib polynomial) of all preceding bytes, u32.
inline constexpr char kModelMagic[4] = {'V', 'D', 'I', 'P'};
inline constexpr std::uint16_t kModelFormatVersion = 1;

std::vector<std::uint8_t> serialize(const MlpModel& model);
MlpModel deserialize(std::span<const std::uint8_t> bytes);

void save_model(const MlpModel& model, const std::string& path);
MlpModel load_model(const std::string& path);

}  // namespace veridip
