// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the relit project.

#pragma once

#include <filesystem>

#include "relit/image.hpp"

namespace relit {

/// 8-bit RGB PNG. Values are clamped to [0,1] and rounded to the nearest code.
void write_png(const std::filesystem::path& path, const RasterImage& image);

/// Reads any PNG libpng understands, converted to 8-bit RGB and divided by 255.
/// Coverage is set to 1. Throws InputError on missing or malformed files.
RasterImage read_png(const std::filesystem::path& path);

/// Little-endian colour PFM ("PF"), bottom row first as the format prescribes.
void write_pfm(const std::filesystem::path& path, const RasterImage& image);
RasterImage read_pfm(const std::filesystem::path& path);

/// Quantises to the 8-bit grid exactly as a PNG round trip would.
RasterImage quantize_8bit(const RasterImage& image);

}  // namespace relit
