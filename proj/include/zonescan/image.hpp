#pragma once

#include <cstdint>
#include <vector>

namespace zonescan {

// One (x, y) plane. u = x runs fastest, v = y; pixel (u, v) sits at v*width+u.
struct SliceImage {
  int width = 0;
  int height = 0;
  std::vector<float> pixels;

  SliceImage() = default;
  SliceImage(int w, int h, float fill = 0.0f)
      : width(w), height(h), pixels(std::size_t(w) * std::size_t(h), fill) {}

  float& at(int u, int v) { return pixels[std::size_t(v) * width + u]; }
  float at(int u, int v) const { return pixels[std::size_t(v) * width + u]; }
  std::size_t size() const { return pixels.size(); }
};

struct BinaryMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bits;  // values are exactly 0 or 1

  BinaryMask() = default;
  BinaryMask(int w, int h, std::uint8_t fill = 0)
      : width(w), height(h), bits(std::size_t(w) * std::size_t(h), fill) {}

  std::uint8_t& at(int u, int v) { return bits[std::size_t(v) * width + u]; }
  std::uint8_t at(int u, int v) const { return bits[std::size_t(v) * width + u]; }
  std::size_t size() const { return bits.size(); }

  std::size_t count_ones() const {
    std::size_t n = 0;
    for (auto b : bits) n += b;
    return n;
  }
};

struct ComponentStats {
  int area = 0;
  int min_u = 0, min_v = 0, max_u = 0, max_v = 0;
  double centroid_u = 0.0, centroid_v = 0.0;
};

// Dense component labels, 0 = background, 1..count in raster order of the
// component's first pixel.
struct LabeledMask {
  int width = 0;
  int height = 0;
  std::vector<std::int32_t> labels;
  int count = 0;
  std::vector<ComponentStats> stats;  // stats[i] belongs to label i+1

  std::int32_t at(int u, int v) const { return labels[std::size_t(v) * width + u]; }
};

}  // namespace zonescan
