#include "zonescan/zoner.hpp"

#include <cmath>
#include <sstream>

#include "zonescan/error.hpp"
#include "zonescan/util.hpp"

namespace zonescan {

std::pair<int, int> body_extent(const MaskStack& masks) {
  int lo = -1, hi = -1;
  for (std::size_t z = 0; z < masks.size(); ++z) {
    if (masks[z].count_ones() == 0) continue;
    if (lo < 0) lo = int(z);
    hi = int(z);
  }
  if (lo < 0) throw NoForegroundError("body_extent: no foreground in any slice");
  return {lo, hi};
}

double foreground_centroid_u(const BinaryMask& mask) {
  double sum = 0.0;
  std::size_t n = 0;
  for (int v = 0; v < mask.height; ++v)
    for (int u = 0; u < mask.width; ++u)
      if (mask.at(u, v)) {
        sum += u;
        ++n;
      }
  if (n == 0) throw NoForegroundError("empty mask has no centroid");
  return sum / double(n);
}

SideMap split_left_right(const BinaryMask& mask) {
  const double mid = foreground_centroid_u(mask);
  SideMap out;
  out.width = mask.width;
  out.height = mask.height;
  out.side.assign(mask.size(), 0);
  for (int v = 0; v < mask.height; ++v)
    for (int u = 0; u < mask.width; ++u)
      out.side[std::size_t(v) * mask.width + u] =
          std::uint8_t(u < mid ? Side::Right : Side::Left);
  return out;
}

ZoneLabelVolume assign_zones(const MaskStack& masks, const ZoneBandTable& table) {
  table.validate();
  if (masks.empty()) throw NoForegroundError("assign_zones: empty mask stack");
  const auto [z_bottom, z_top] = body_extent(masks);
  const int w = masks[std::size_t(z_bottom)].width;
  const int h = masks[std::size_t(z_bottom)].height;

  ZoneLabelVolume zl(w, h, int(masks.size()));
  for (int z = z_bottom; z <= z_top; ++z) {
    const BinaryMask& mask = masks[std::size_t(z)];
    if (mask.width != w || mask.height != h)
      throw ShapeError("assign_zones: slice dimensions differ across z");
    if (mask.count_ones() == 0) continue;

    const double hrel =
        (z_top == z_bottom) ? 0.0
                            : double(z - z_bottom) / double(z_top - z_bottom);
    const int band = table.band_index(hrel);
    const auto& b = table.bands[std::size_t(band)];
    const double mid = foreground_centroid_u(mask);

    double half_strip = -1.0;
    if (band == table.groin_band) {
      int min_u = w, max_u = -1;
      for (int v = 0; v < h; ++v)
        for (int u = 0; u < w; ++u)
          if (mask.at(u, v)) {
            min_u = std::min(min_u, u);
            max_u = std::max(max_u, u);
          }
      half_strip = table.strip_fraction * double(max_u - min_u + 1) / 2.0;
    }

    for (int v = 0; v < h; ++v)
      for (int u = 0; u < w; ++u) {
        if (!mask.at(u, v)) continue;
        std::uint8_t zone;
        if (half_strip >= 0.0 && std::abs(u - mid) <= half_strip)
          zone = std::uint8_t(table.groin_zone);
        else
          zone = std::uint8_t(u < mid ? b.right_zone : b.left_zone);
        zl.at(u, v, z) = zone;
      }
  }
  return zl;
}

std::vector<std::array<int, 3>> extract_zone_points(const ZoneLabelVolume& zl,
                                                    int zone) {
  if (zone < 1 || zone > 17)
    throw ParamError("extract_zone_points: zone must be in 1..17");
  std::vector<std::array<int, 3>> pts;
  for (int z = 0; z < zl.nz; ++z)
    for (int y = 0; y < zl.ny; ++y)
      for (int x = 0; x < zl.nx; ++x)
        if (zl.at(x, y, z) == zone) pts.push_back({x, y, z});
  return pts;
}

void write_zone_point_clouds(const ZoneLabelVolume& zl, const std::string& dir) {
  ensure_dir(dir);
  for (int zone = 1; zone <= 17; ++zone) {
    std::ostringstream out;
    out << "x,y,z\n";
    for (const auto& p : extract_zone_points(zl, zone))
      out << p[0] << ',' << p[1] << ',' << p[2] << "\n";
    atomic_write_file(
        path_join(dir, "zone" + std::to_string(zone) + "_points.csv"),
        out.str());
  }
}

MaskStack masks_from_zone_volume(const ZoneLabelVolume& zl) {
  MaskStack masks(std::size_t(zl.nz));
  for (int z = 0; z < zl.nz; ++z) {
    BinaryMask m(zl.nx, zl.ny);
    for (int y = 0; y < zl.ny; ++y)
      for (int x = 0; x < zl.nx; ++x)
        m.at(x, y) = zl.at(x, y, z) ? 1 : 0;
    masks[std::size_t(z)] = std::move(m);
  }
  return masks;
}

}  // namespace zonescan
