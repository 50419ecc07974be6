// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the relit project.

#include "relit/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace relit {

namespace {

std::uint8_t to_code(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

}  // namespace

void write_png(const std::filesystem::path& path, const RasterImage& image) {
  if (image.pixel_count() == 0) {
    throw InputError("cannot write an empty image to " + path.string());
  }
  std::vector<std::uint8_t> bytes(image.data().size());
  std::transform(image.data().begin(), image.data().end(), bytes.begin(), to_code);

  png_image desc;
  std::memset(&desc, 0, sizeof(desc));
  desc.version = PNG_IMAGE_VERSION;
  desc.width = static_cast<png_uint_32>(image.width());
  desc.height = static_cast<png_uint_32>(image.height());
  desc.format = PNG_FORMAT_RGB;
  if (png_image_write_to_file(&desc, path.c_str(), 0, bytes.data(), 0, nullptr) == 0) {
    const std::string msg = desc.message;
    png_image_free(&desc);
    throw std::runtime_error("failed to write PNG " + path.string() + ": " + msg);
  }
}

RasterImage read_png(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw InputError("image not found: " + path.string());
  }
  png_image desc;
  std::memset(&desc, 0, sizeof(desc));
  desc.version = PNG_IMAGE_VERSION;
  if (png_image_begin_read_from_file(&desc, path.c_str()) == 0) {
    const std::string msg = desc.message;
    png_image_free(&desc);
    throw InputError("malformed PNG " + path.string() + ": " + msg);
  }
  desc.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> bytes(PNG_IMAGE_SIZE(desc));
  if (png_image_finish_read(&desc, nullptr, bytes.data(), 0, nullptr) == 0) {
    const std::string msg = desc.message;
    png_image_free(&desc);
    throw InputError("malformed PNG " + path.string() + ": " + msg);
  }
  RasterImage image(static_cast<int>(desc.height), static_cast<int>(desc.width));
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    image.data()[i] = bytes[i] / 255.0;
  }
  return image;
}

void write_pfm(const std::filesystem::path& path, const RasterImage& image) {
  static_assert(std::endian::native == std::endian::little, "PFM writer assumes little endian");
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot open " + path.string() + " for writing");
  }
  out << "PF\n" << image.width() << " " << image.height() << "\n-1.0\n";
  std::vector<float> row(3 * static_cast<std::size_t>(image.width()));
  for (int y = image.height() - 1; y >= 0; --y) {
    for (int x = 0; x < image.width(); ++x) {
      for (int c = 0; c < 3; ++c) {
        row[3 * x + c] = static_cast<float>(image.at(y, x, c));
      }
    }
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size() * sizeof(float)));
  }
}

RasterImage read_pfm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw InputError("image not found: " + path.string());
  }
  std::string magic;
  int width = 0;
  int height = 0;
  double scale = 0.0;
  in >> magic >> width >> height >> scale;
  in.get();
  if (!in || magic != "PF" || width <= 0 || height <= 0 || scale >= 0.0) {
    throw InputError("unsupported or malformed PFM header in " + path.string());
  }
  RasterImage image(height, width);
  std::vector<float> row(3 * static_cast<std::size_t>(width));
  for (int y = height - 1; y >= 0; --y) {
    in.read(reinterpret_cast<char*>(row.data()),
            static_cast<std::streamsize>(row.size() * sizeof(float)));
    if (!in) {
      throw InputError("truncated PFM " + path.string());
    }
    for (int x = 0; x < width; ++x) {
      for (int c = 0; c < 3; ++c) {
        image.at(y, x, c) = row[3 * x + c];
      }
    }
  }
  return image;
}

RasterImage quantize_8bit(const RasterImage& image) {
  RasterImage out = image;
  for (double& v : out.data()) {
    v = to_code(v) / 255.0;
  }
  return out;
}

}  // namespace relit
