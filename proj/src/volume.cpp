#include "zonescan/volume.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "zonescan/error.hpp"
#include "zonescan/util.hpp"

namespace zonescan {

namespace {

constexpr char kMagic[8] = {'S', 'C', 'A', 'N', 'V', 'O', 'L', '1'};

void put_u32(std::string& out, std::uint32_t v) {
  out.push_back(char(v & 0xff));
  out.push_back(char((v >> 8) & 0xff));
  out.push_back(char((v >> 16) & 0xff));
  out.push_back(char((v >> 24) & 0xff));
}

std::uint32_t get_u32(const unsigned char* p) {
  return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 |
         std::uint32_t(p[2]) << 16 | std::uint32_t(p[3]) << 24;
}

}  // namespace

ScanVolume::ScanVolume(std::string id, int nx_, int ny_, int nz_, float fill)
    : body_id(std::move(id)), nx(nx_), ny(ny_), nz(nz_),
      voxels(std::size_t(nx_) * ny_ * nz_, fill) {
  recompute_range();
}

void ScanVolume::recompute_range() {
  if (voxels.empty()) {
    intensity_min = intensity_max = 0.0f;
    return;
  }
  float lo = voxels[0], hi = voxels[0];
  for (float v : voxels) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  intensity_min = lo;
  intensity_max = hi;
}

ScanVolume read_volume(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open volume file " + path);

  char magic[8];
  f.read(magic, 8);
  if (f.gcount() != 8 || std::memcmp(magic, kMagic, 8) != 0)
    throw FormatError("bad magic in " + path + " (not a SCANVOL1 file)");

  unsigned char dims[12];
  f.read(reinterpret_cast<char*>(dims), 12);
  if (f.gcount() != 12) throw CorruptionError("truncated header in " + path);

  const std::uint32_t nx = get_u32(dims), ny = get_u32(dims + 4),
                      nz = get_u32(dims + 8);
  if (nx == 0 || ny == 0 || nz == 0)
    throw FormatError("zero dimension in " + path);
  const std::uint64_t count = std::uint64_t(nx) * ny * nz;
  if (count > (std::uint64_t(1) << 31))
    throw FormatError("volume too large in " + path);

  ScanVolume v;
  v.body_id = path_stem(path);
  v.nx = int(nx);
  v.ny = int(ny);
  v.nz = int(nz);
  v.voxels.resize(std::size_t(count));
  f.read(reinterpret_cast<char*>(v.voxels.data()),
         std::streamsize(count * 4));
  if (std::size_t(f.gcount()) != count * 4)
    throw CorruptionError("truncated payload in " + path + ": expected " +
                          std::to_string(count) + " voxels");

  if constexpr (std::endian::native == std::endian::big) {
    for (auto& x : v.voxels) {
      auto u = std::bit_cast<std::uint32_t>(x);
      u = __builtin_bswap32(u);
      x = std::bit_cast<float>(u);
    }
  }

  for (float x : v.voxels)
    if (!std::isfinite(x))
      throw DataError("non-finite voxel value in " + path);

  v.recompute_range();
  return v;
}

void write_volume(const ScanVolume& v, const std::string& path) {
  if (v.nx < 1 || v.ny < 1 || v.nz < 1)
    throw ValidationError("volume dimensions must be positive");
  if (v.voxels.size() != std::size_t(v.nx) * v.ny * v.nz)
    throw ValidationError("voxel count does not match dimensions");

  std::string out;
  out.reserve(20 + v.voxels.size() * 4);
  out.append(kMagic, 8);
  put_u32(out, std::uint32_t(v.nx));
  put_u32(out, std::uint32_t(v.ny));
  put_u32(out, std::uint32_t(v.nz));
  if constexpr (std::endian::native == std::endian::little) {
    out.append(reinterpret_cast<const char*>(v.voxels.data()),
               v.voxels.size() * 4);
  } else {
    for (float x : v.voxels) {
      auto u = std::bit_cast<std::uint32_t>(x);
      out.push_back(char(u & 0xff));
      out.push_back(char((u >> 8) & 0xff));
      out.push_back(char((u >> 16) & 0xff));
      out.push_back(char((u >> 24) & 0xff));
    }
  }
  atomic_write_file(path, out);
}

SliceImage slice_xy(const ScanVolume& v, int z) {
  if (z < 0 || z >= v.nz)
    throw BoundsError("slice z=" + std::to_string(z) + " out of range [0," +
                      std::to_string(v.nz - 1) + "]");
  SliceImage img(v.nx, v.ny);
  const float* src = v.voxels.data() + std::size_t(z) * v.nx * v.ny;
  std::copy(src, src + std::size_t(v.nx) * v.ny, img.pixels.begin());
  return img;
}

ZoneLabelVolume read_zone_volume(const std::string& path) {
  ScanVolume v = read_volume(path);
  ZoneLabelVolume zl(v.nx, v.ny, v.nz);
  for (std::size_t i = 0; i < v.voxels.size(); ++i) {
    const float x = v.voxels[i];
    if (x < 0.0f || x > 17.0f || x != float(int(x)))
      throw DataError("invalid zone label value in " + path);
    zl.labels[i] = std::uint8_t(x);
  }
  return zl;
}

void write_zone_volume(const ZoneLabelVolume& zl, const std::string& path) {
  ScanVolume v(path_stem(path), zl.nx, zl.ny, zl.nz);
  for (std::size_t i = 0; i < zl.labels.size(); ++i)
    v.voxels[i] = float(zl.labels[i]);
  v.recompute_range();
  write_volume(v, path);
}

}  // namespace zonescan
