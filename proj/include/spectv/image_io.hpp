#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "spectv/image.hpp"

namespace spectv {

/// Reads 8/16-bit PNG or binary/ASCII PPM/PGM, scaling to [0,1]. Alpha is dropped.
Image load_image(const std::filesystem::path& path);
Image decode_png(const std::vector<std::uint8_t>& bytes);

struct SaveOptions {
  int bit_depth = 8;       // 8 or 16
  bool offset = false;     // signed data: stores v + 0.5
};

/// Writes by extension (.png, .ppm, .pgm). Values are clamped to [0,1] before
/// quantization. Images tagged LCC are written as their raw channels.
void save_image(const Image& img, const std::filesystem::path& path, SaveOptions opts = {});
std::vector<std::uint8_t> encode_png(const Image& img, SaveOptions opts = {});

/// 0 maps to 0.5; used to visualize signed spectral bands.
Image offset_encode(const Image& band);
Image offset_decode(const Image& encoded);

}  // namespace spectv
