#include "zonescan/zone_table.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <sstream>

#include "zonescan/error.hpp"
#include "zonescan/util.hpp"

namespace zonescan {

ZoneBandTable ZoneBandTable::defaults() {
  ZoneBandTable t;
  t.bands = {
      {0.00, 0.10, 15, 16},  // ankles
      {0.10, 0.25, 13, 14},  // lower legs
      {0.25, 0.42, 11, 12},  // thighs
      {0.42, 0.50, 8, 10},   // groin band, zone 9 in the central strip
      {0.50, 0.58, 6, 7},    // abdomen
      {0.58, 0.70, 5, 17},   // chest
      {0.70, 0.82, 2, 4},    // shoulders / upper arms
      {0.82, 1.00, 1, 3},    // head and neck
  };
  t.groin_band = 3;
  t.strip_fraction = 0.25;
  t.groin_zone = 9;
  return t;
}

void ZoneBandTable::validate() const {
  if (bands.empty()) throw ValidationError("zone table has no bands");
  if (groin_band < 0 || groin_band >= int(bands.size()))
    throw ValidationError("zone table has no groin band");
  if (strip_fraction <= 0.0 || strip_fraction >= 1.0)
    throw ValidationError("strip_fraction must be in (0,1)");

  if (std::abs(bands.front().h_lo) > 1e-12)
    throw ValidationError("first band must start at 0");
  if (std::abs(bands.back().h_hi - 1.0) > 1e-12)
    throw ValidationError("last band must end at 1");
  for (std::size_t i = 0; i < bands.size(); ++i) {
    if (!(bands[i].h_lo < bands[i].h_hi))
      throw ValidationError("band " + std::to_string(i) + " has h_lo >= h_hi");
    if (i > 0 && std::abs(bands[i].h_lo - bands[i - 1].h_hi) > 1e-12)
      throw ValidationError("bands must tile [0,1] without gaps or overlaps");
  }

  std::array<int, 18> seen{};
  auto mark = [&](int z) {
    if (z < 1 || z > 17)
      throw ValidationError("zone id " + std::to_string(z) + " outside 1..17");
    if (seen[std::size_t(z)]++)
      throw ValidationError("zone id " + std::to_string(z) + " assigned twice");
  };
  for (const auto& b : bands) {
    mark(b.right_zone);
    mark(b.left_zone);
  }
  mark(groin_zone);
  for (int z = 1; z <= 17; ++z)
    if (!seen[std::size_t(z)])
      throw ValidationError("zone id " + std::to_string(z) + " never assigned");
}

int ZoneBandTable::band_index(double h) const {
  if (h <= bands.front().h_lo) return 0;
  for (std::size_t i = 0; i < bands.size(); ++i)
    if (h < bands[i].h_hi) return int(i);
  return int(bands.size()) - 1;  // h == 1 (or above): last band is closed
}

int ZoneBandTable::mirror_zone(int zone) const {
  if (zone == groin_zone) return zone;
  for (const auto& b : bands) {
    if (b.right_zone == zone) return b.left_zone;
    if (b.left_zone == zone) return b.right_zone;
  }
  throw ValidationError("zone id " + std::to_string(zone) + " not in table");
}

ZoneBandTable read_zone_table(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open zone table " + path);

  std::string line;
  if (!std::getline(f, line)) throw SchemaError("empty zone table " + path);
  const auto header = split_csv_line(trim(line));
  const auto expected =
      split_csv_line("band,h_lo,h_hi,right_zone,left_zone,strip_fraction");
  if (header != expected)
    throw SchemaError("zone table header mismatch in " + path);

  ZoneBandTable t;
  t.groin_band = -1;
  while (std::getline(f, line)) {
    const std::string s = trim(line);
    if (s.empty()) continue;
    const auto cols = split_csv_line(s);
    if (cols.size() != 6)
      throw SchemaError("expected 6 columns in zone table row: " + s);
    ZoneBand b;
    b.h_lo = parse_double(cols[1], "h_lo");
    b.h_hi = parse_double(cols[2], "h_hi");
    b.right_zone = parse_int(cols[3], "right_zone");
    b.left_zone = parse_int(cols[4], "left_zone");
    t.bands.push_back(b);
    if (!trim(cols[5]).empty()) {
      if (t.groin_band >= 0)
        throw ValidationError("more than one groin row in " + path);
      t.groin_band = int(t.bands.size()) - 1;
      t.strip_fraction = parse_double(cols[5], "strip_fraction");
    }
  }
  t.validate();
  return t;
}

void write_zone_table(const ZoneBandTable& table, const std::string& path) {
  table.validate();
  std::ostringstream out;
  out << "band,h_lo,h_hi,right_zone,left_zone,strip_fraction\n";
  for (std::size_t i = 0; i < table.bands.size(); ++i) {
    const auto& b = table.bands[i];
    out << i << ',' << fmt_g(b.h_lo) << ',' << fmt_g(b.h_hi) << ','
        << b.right_zone << ',' << b.left_zone << ',';
    if (int(i) == table.groin_band) out << fmt_g(table.strip_fraction);
    out << "\n";
  }
  atomic_write_file(path, out.str());
}

}  // namespace zonescan
