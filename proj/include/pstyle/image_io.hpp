// Copyright 2026 The pstyle Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "pstyle/image.hpp"

namespace pstyle {

/// Raw 8-bit pixels as stored on disk.
struct Image8 {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<std::uint8_t> pixels;
};

Image8 read_png8(const std::filesystem::path& path);
void write_png8(const std::filesystem::path& path, const Image8& img);

/// Quantizes to 8 bits with round-to-nearest after clamping to [0, 1].
Image8 quantize8(const Image& img);
Image dequantize8(const Image8& img);

/// Reads a gray or RGB PNG, values mapped to [0, 1]. Gray-alpha and RGBA
/// inputs drop the alpha channel.
Image read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Image& img);

}  // namespace pstyle
