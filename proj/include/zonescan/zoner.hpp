#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "zonescan/image.hpp"
#include "zonescan/volume.hpp"
#include "zonescan/zone_table.hpp"

namespace zonescan {

// Per-z foreground masks of one body, index = z.
using MaskStack = std::vector<BinaryMask>;

// Smallest and largest z with any foreground pixel. Relative height is
// h(z) = (z - bottom) / (top - bottom); a one-slice body has h = 0.
std::pair<int, int> body_extent(const MaskStack& masks);

enum class Side : std::uint8_t { Right = 0, Left = 1 };

struct SideMap {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> side;  // Side values for every pixel

  Side at(int u, int v) const {
    return Side(side[std::size_t(v) * width + u]);
  }
};

// Mean foreground x of the slice; errors when the mask is empty.
double foreground_centroid_u(const BinaryMask& mask);

// Midline = foreground centroid x. u < midline is the subject's RIGHT (low-u
// side, scanner facing the subject); u >= midline is LEFT.
SideMap split_left_right(const BinaryMask& mask);

ZoneLabelVolume assign_zones(const MaskStack& masks, const ZoneBandTable& table);

std::vector<std::array<int, 3>> extract_zone_points(const ZoneLabelVolume& zl,
                                                    int zone);

// Writes zone<k>_points.csv (header x,y,z) for k = 1..17 under dir.
void write_zone_point_clouds(const ZoneLabelVolume& zl, const std::string& dir);

MaskStack masks_from_zone_volume(const ZoneLabelVolume& zl);

}  // namespace zonescan
