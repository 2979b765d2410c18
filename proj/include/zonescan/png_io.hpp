#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "zonescan/image.hpp"

namespace zonescan {

struct GrayImage8 {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  GrayImage8() = default;
  GrayImage8(int w, int h, std::uint8_t fill = 0)
      : width(w), height(h), pixels(std::size_t(w) * std::size_t(h), fill) {}

  std::uint8_t& at(int u, int v) { return pixels[std::size_t(v) * width + u]; }
  std::uint8_t at(int u, int v) const { return pixels[std::size_t(v) * width + u]; }
};

// 8-bit grayscale, non-interlaced.
void write_gray_png(const std::string& path, const GrayImage8& img);
GrayImage8 read_gray_png(const std::string& path);

// Min-max normalization to 0..255; a constant image maps to all zeros.
GrayImage8 quantize_minmax(const SliceImage& img);

SliceImage to_slice_image(const GrayImage8& img);

// Debug dumps.
void dump_png(const std::string& path, const SliceImage& img);
void dump_png(const std::string& path, const BinaryMask& mask);

}  // namespace zonescan
