#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "zonescan/image.hpp"

namespace zonescan {

// 3D intensity grid. Voxels are stored x-fastest, then y, then z, so voxel
// (x, y, z) sits at (z*ny + y)*nx + x.
struct ScanVolume {
  std::string body_id;
  int nx = 0, ny = 0, nz = 0;
  std::vector<float> voxels;
  float intensity_min = 0.0f;
  float intensity_max = 0.0f;

  ScanVolume() = default;
  ScanVolume(std::string id, int nx_, int ny_, int nz_, float fill = 0.0f);

  float& at(int x, int y, int z) {
    return voxels[(std::size_t(z) * ny + y) * nx + x];
  }
  float at(int x, int y, int z) const {
    return voxels[(std::size_t(z) * ny + y) * nx + x];
  }

  void recompute_range();
};

// Per-voxel zone ids aligned to a ScanVolume. 0 = background, 1..17 = zones.
struct ZoneLabelVolume {
  int nx = 0, ny = 0, nz = 0;
  std::vector<std::uint8_t> labels;

  ZoneLabelVolume() = default;
  ZoneLabelVolume(int nx_, int ny_, int nz_)
      : nx(nx_), ny(ny_), nz(nz_),
        labels(std::size_t(nx_) * ny_ * nz_, 0) {}

  std::uint8_t& at(int x, int y, int z) {
    return labels[(std::size_t(z) * ny + y) * nx + x];
  }
  std::uint8_t at(int x, int y, int z) const {
    return labels[(std::size_t(z) * ny + y) * nx + x];
  }
};

// SCANVOL1 container: 8-byte magic "SCANVOL1", nx/ny/nz as u32 LE, then
// nx*ny*nz float32 LE values, x-fastest. The body id is not part of the
// payload; read_volume takes it from the file name stem.
ScanVolume read_volume(const std::string& path);
void write_volume(const ScanVolume& v, const std::string& path);

SliceImage slice_xy(const ScanVolume& v, int z);

// Zone labels travel in the same container with label values as floats.
ZoneLabelVolume read_zone_volume(const std::string& path);
void write_zone_volume(const ZoneLabelVolume& zl, const std::string& path);

}  // namespace zonescan
