#pragma once

#include <string>
#include <vector>

namespace zonescan {

// One z-band of relative body height mapped to a right/left zone pair.
struct ZoneBand {
  double h_lo = 0.0;
  double h_hi = 0.0;
  int right_zone = 0;
  int left_zone = 0;
};

// Eight bands tiling [0, 1] from body bottom to top, plus the groin band's
// central strip which overrides the side label with zone 9.
struct ZoneBandTable {
  std::vector<ZoneBand> bands;
  int groin_band = -1;          // index into bands
  double strip_fraction = 0.25; // central strip width as a fraction of body width
  int groin_zone = 9;

  void validate() const;

  // Band containing relative height h in [0,1]. Bands are half-open except the
  // last, which is closed above.
  int band_index(double h) const;

  // right<->left pairing; the groin zone maps to itself.
  int mirror_zone(int zone) const;

  static ZoneBandTable defaults();
};

// CSV: band,h_lo,h_hi,right_zone,left_zone,strip_fraction — strip_fraction is
// filled only on the groin row.
ZoneBandTable read_zone_table(const std::string& path);
void write_zone_table(const ZoneBandTable& table, const std::string& path);

}  // namespace zonescan
