#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "ecam/geometry.hpp"

namespace ecam {

// 8-bit interleaved RGB.
struct RgbImage {
  ImageDims dims;
  std::vector<std::uint8_t> rgb;  // height * width * 3

  bool operator==(const RgbImage&) const = default;
};

struct GrayImage {
  ImageDims dims;
  std::vector<std::uint8_t> luma;  // height * width

  bool operator==(const GrayImage&) const = default;
};

// PNG or JPEG, detected from the leading bytes. Gray and palette inputs are
// expanded to RGB; alpha is dropped.
RgbImage read_rgb_image(const std::filesystem::path& path);

// PNG of any color type reduced to 8-bit luminance.
GrayImage read_gray_png(const std::filesystem::path& path);

// 8-bit RGB, no interlacing, fixed filter and zlib settings, no time or text
// chunks: identical pixels give identical bytes.
std::vector<std::uint8_t> encode_png_rgb(const RgbImage& image);
std::vector<std::uint8_t> encode_png_gray(const GrayImage& image);

void write_png(const std::filesystem::path& path, const RgbImage& image);
void write_png(const std::filesystem::path& path, const GrayImage& image);

}  // namespace ecam
