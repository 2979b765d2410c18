#include <doctest.h>

#include <set>

#include "test_helpers.hpp"
#include "zonescan/error.hpp"
#include "zonescan/imgproc.hpp"
#include "zonescan/phantom.hpp"
#include "zonescan/util.hpp"
#include "zonescan/volume.hpp"
#include "zonescan/zoner.hpp"

using namespace zonescan;

namespace {

BinaryMask bar_mask(int w, int h, int u0, int u1, int v = 1) {
  BinaryMask m(w, h);
  for (int u = u0; u <= u1; ++u) m.at(u, v) = 1;
  return m;
}

}  // namespace

TEST_CASE("zone band table defaults validate and pair up") {
  const ZoneBandTable t = ZoneBandTable::defaults();
  t.validate();
  CHECK(t.bands.size() == 8);
  CHECK(t.mirror_zone(15) == 16);
  CHECK(t.mirror_zone(16) == 15);
  CHECK(t.mirror_zone(9) == 9);
  CHECK(t.mirror_zone(5) == 17);
  CHECK(t.band_index(0.0) == 0);
  CHECK(t.band_index(0.05) == 0);
  CHECK(t.band_index(0.10) == 1);
  CHECK(t.band_index(1.0) == 7);
}

TEST_CASE("zone band table CSV roundtrip") {
  TempDir dir("zt");
  const ZoneBandTable t = ZoneBandTable::defaults();
  const std::string p = dir.file("table.csv");
  write_zone_table(t, p);
  const ZoneBandTable back = read_zone_table(p);
  REQUIRE(back.bands.size() == t.bands.size());
  for (std::size_t i = 0; i < t.bands.size(); ++i) {
    CHECK(back.bands[i].h_lo == doctest::Approx(t.bands[i].h_lo));
    CHECK(back.bands[i].right_zone == t.bands[i].right_zone);
    CHECK(back.bands[i].left_zone == t.bands[i].left_zone);
  }
  CHECK(back.groin_band == t.groin_band);
  CHECK(back.strip_fraction == doctest::Approx(t.strip_fraction));
}

TEST_CASE("zone band table rejects broken tables") {
  ZoneBandTable t = ZoneBandTable::defaults();
  SUBCASE("gap between bands") {
    t.bands[2].h_hi = 0.40;
    CHECK_THROWS_AS(t.validate(), ValidationError);
  }
  SUBCASE("duplicate zone id") {
    t.bands[0].right_zone = 16;
    CHECK_THROWS_AS(t.validate(), ValidationError);
  }
  SUBCASE("missing coverage of 1..17") {
    t.bands[0].right_zone = 15;
    t.bands[0].left_zone = 15;
    CHECK_THROWS_AS(t.validate(), ValidationError);
  }
}

TEST_CASE("body extent finds the foreground span") {
  MaskStack masks(60, BinaryMask(8, 8));
  for (int z = 10; z <= 50; ++z) masks[std::size_t(z)].at(3, 3) = 1;
  CHECK(body_extent(masks) == std::pair<int, int>{10, 50});

  MaskStack one(12, BinaryMask(4, 4));
  one[7].at(1, 1) = 1;
  CHECK(body_extent(one) == std::pair<int, int>{7, 7});

  CHECK_THROWS_AS(body_extent(MaskStack(5, BinaryMask(4, 4))),
                  NoForegroundError);
}

TEST_CASE("body extent of a tall phantom matches its ground truth") {
  PhantomSpec spec;
  spec.nx = 64;
  spec.ny = 64;
  spec.nz = 660;
  spec.height_voxels = 600;
  spec.z_offset = 20;
  spec.torso_radius = 11;
  spec.limb_radius = 4;
  spec.seed = 9;
  const PhantomResult r = generate_phantom(spec);
  const MaskStack gt = masks_from_zone_volume(r.zones);
  CHECK(body_extent(gt) == std::pair<int, int>{20, 619});
}

TEST_CASE("left/right split against the centroid midline") {
  // two symmetric blobs around u = 50
  BinaryMask m(100, 3);
  for (int u = 10; u <= 30; ++u) m.at(u, 1) = 1;
  for (int u = 70; u <= 90; ++u) m.at(u, 1) = 1;
  CHECK(foreground_centroid_u(m) == doctest::Approx(50.0));

  const SideMap sides = split_left_right(m);
  for (int u = 10; u <= 30; ++u) CHECK(sides.at(u, 1) == Side::Right);
  for (int u = 70; u <= 90; ++u) CHECK(sides.at(u, 1) == Side::Left);

  SUBCASE("a single pixel sits at its own centroid and goes LEFT") {
    BinaryMask px(5, 5);
    px.at(2, 2) = 1;
    CHECK(split_left_right(px).at(2, 2) == Side::Left);
  }
  SUBCASE("empty mask") {
    CHECK_THROWS_AS(split_left_right(BinaryMask(4, 4)), NoForegroundError);
  }
}

TEST_CASE("assign_zones band and side lookups") {
  // body occupying z = 0..100 with a flat bar per slice
  MaskStack masks(101);
  for (auto& m : masks) m = bar_mask(40, 3, 10, 29);
  const ZoneBandTable table = ZoneBandTable::defaults();
  const ZoneLabelVolume zl = assign_zones(masks, table);

  // h = 0.05: ankle band; u=10 is right of the centroid (19.5)
  CHECK(zl.at(10, 1, 5) == 15);
  CHECK(zl.at(29, 1, 5) == 16);
  // h = 0.45: groin band; midline pixel inside the central strip
  CHECK(zl.at(19, 1, 45) == 9);
  CHECK(zl.at(20, 1, 45) == 9);
  CHECK(zl.at(10, 1, 45) == 8);
  CHECK(zl.at(29, 1, 45) == 10);
  // top band
  CHECK(zl.at(10, 1, 100) == 1);
  CHECK(zl.at(29, 1, 100) == 3);
  // background untouched
  CHECK(zl.at(0, 0, 50) == 0);
}

TEST_CASE("zone ids along a column change only at band boundaries") {
  MaskStack masks(101);
  for (auto& m : masks) m = bar_mask(40, 3, 10, 29);
  const ZoneLabelVolume zl = assign_zones(masks, ZoneBandTable::defaults());
  int changes = 0;
  int prev = zl.at(12, 1, 0);
  for (int z = 1; z <= 100; ++z) {
    const int cur = zl.at(12, 1, z);
    CHECK(cur != 0);
    if (cur != prev) ++changes;
    prev = cur;
  }
  CHECK(changes == 7);  // eight bands
}

TEST_CASE("extract_zone_points partitions the foreground") {
  ZoneLabelVolume zl(6, 6, 4);
  zl.at(1, 1, 0) = 14;
  zl.at(2, 1, 1) = 14;
  zl.at(3, 3, 2) = 14;
  zl.at(4, 4, 3) = 2;

  const auto pts = extract_zone_points(zl, 14);
  REQUIRE(pts.size() == 3);
  CHECK(pts[0] == std::array<int, 3>{1, 1, 0});
  CHECK(extract_zone_points(zl, 11).empty());
  CHECK_THROWS_AS(extract_zone_points(zl, 0), ParamError);
  CHECK_THROWS_AS(extract_zone_points(zl, 18), ParamError);

  std::size_t total = 0, fg = 0;
  for (int z = 1; z <= 17; ++z) total += extract_zone_points(zl, z).size();
  for (auto l : zl.labels) fg += l ? 1 : 0;
  CHECK(total == fg);
}

TEST_CASE("zone point cloud CSV export") {
  TempDir dir("pc");
  ZoneLabelVolume zl(4, 4, 2);
  zl.at(1, 2, 1) = 5;
  write_zone_point_clouds(zl, dir.str());
  const std::string five = read_text_file(dir.file("zone5_points.csv"));
  CHECK(five == "x,y,z\n1,2,1\n");
  const std::string nine = read_text_file(dir.file("zone9_points.csv"));
  CHECK(nine == "x,y,z\n");
}

TEST_CASE("mirroring in x maps zones through the left/right pairing") {
  const ZoneBandTable table = ZoneBandTable::defaults();
  Rng rng(19);
  const int W = 30, H = 6;

  MaskStack masks(40, BinaryMask(W, H));
  for (int z = 2; z <= 37; ++z) {
    BinaryMask m(W, H);
    for (int v = 1; v < H - 1; ++v)
      for (int u = 2; u < W - 2; ++u)
        m.at(u, v) = rng.uniform() < 0.4 ? 1 : 0;
    if (m.count_ones() == 0) m.at(5, 2) = 1;
    masks[std::size_t(z)] = std::move(m);
  }
  MaskStack mirrored(40, BinaryMask(W, H));
  for (std::size_t z = 0; z < masks.size(); ++z) {
    BinaryMask m(W, H);
    for (int v = 0; v < H; ++v)
      for (int u = 0; u < W; ++u) m.at(u, v) = masks[z].at(W - 1 - u, v);
    mirrored[z] = std::move(m);
  }

  const ZoneLabelVolume a = assign_zones(masks, table);
  const ZoneLabelVolume b = assign_zones(mirrored, table);
  for (int z = 0; z < 40; ++z) {
    const auto ones = masks[std::size_t(z)].count_ones();
    if (ones == 0) continue;
    const double mid = foreground_centroid_u(masks[std::size_t(z)]);
    if (mid == double(std::int64_t(mid))) continue;  // tie pixels flip sides
    for (int v = 0; v < H; ++v)
      for (int u = 0; u < W; ++u) {
        const int za = a.at(u, v, z);
        if (!za) continue;
        CHECK(b.at(W - 1 - u, v, z) == table.mirror_zone(za));
      }
  }
}

TEST_CASE("stretching the body in z leaves zone assignments unchanged") {
  const ZoneBandTable table = ZoneBandTable::defaults();
  MaskStack masks(101);
  Rng rng(23);
  for (auto& m : masks) {
    m = BinaryMask(24, 4);
    for (int u = 4; u < 20; ++u) m.at(u, 1) = rng.uniform() < 0.7 ? 1 : 0;
    if (m.count_ones() == 0) m.at(10, 1) = 1;
  }
  const ZoneLabelVolume base = assign_zones(masks, table);

  const int s = 3;
  MaskStack streched(std::size_t(100 * s + 1), BinaryMask(24, 4));
  for (int z = 0; z <= 100; ++z) streched[std::size_t(z * s)] = masks[std::size_t(z)];
  const ZoneLabelVolume big = assign_zones(streched, table);

  for (int z = 0; z <= 100; ++z)
    for (int v = 0; v < 4; ++v)
      for (int u = 0; u < 24; ++u)
        CHECK(big.at(u, v, z * s) == base.at(u, v, z));
}

TEST_CASE("arm blobs land on their own side of the midline") {
  PhantomSpec spec;
  spec.seed = 29;
  const PhantomResult r = generate_phantom(spec);
  const MaskStack masks = masks_from_zone_volume(r.zones);

  // chest-band slice: torso plus two arms; the high-x blob is the left arm
  const auto [zb, zt] = body_extent(masks);
  const int z = zb + int(0.62 * (zt - zb));
  const BinaryMask& slice = masks[std::size_t(z)];
  const LabeledMask cc = connected_components(slice, 8);
  REQUIRE(cc.count == 3);

  const SideMap sides = split_left_right(slice);
  int right_blob = 0, left_blob = 0;
  for (const auto& s : cc.stats) {
    if (s.max_u < int(spec.nx / 2) - spec.torso_radius) ++right_blob;
    if (s.min_u > int(spec.nx / 2) + spec.torso_radius) ++left_blob;
  }
  CHECK(right_blob == 1);
  CHECK(left_blob == 1);
  for (int v = 0; v < slice.height; ++v)
    for (int u = 0; u < slice.width; ++u) {
      if (!slice.at(u, v)) continue;
      const std::int32_t label = cc.at(u, v);
      const auto& s = cc.stats[std::size_t(label - 1)];
      if (s.min_u > int(spec.nx / 2) + spec.torso_radius)
        CHECK(sides.at(u, v) == Side::Left);
      if (s.max_u < int(spec.nx / 2) - spec.torso_radius)
        CHECK(sides.at(u, v) == Side::Right);
    }
}

TEST_CASE("full phantom zoning matches the generator ground truth") {
  PhantomSpec spec;
  spec.nx = 56;
  spec.ny = 56;
  spec.nz = 48;
  spec.height_voxels = 40;
  spec.z_offset = 4;
  spec.seed = 31;
  const PhantomResult r = generate_phantom(spec);

  CleanupParams params;
  params.R = (double(r.volume.intensity_max) - r.volume.intensity_min) / 2.0;
  MaskStack masks(std::size_t(spec.nz));
  for (int z = 0; z < spec.nz; ++z)
    masks[std::size_t(z)] = clean_slice_mask(slice_xy(r.volume, z), params);

  const ZoneLabelVolume zl = assign_zones(masks, spec.table);

  // accuracy over the ground-truth body
  std::size_t gt_fg = 0, match = 0;
  for (std::size_t i = 0; i < zl.labels.size(); ++i) {
    if (!r.zones.labels[i]) continue;
    ++gt_fg;
    if (zl.labels[i] == r.zones.labels[i]) ++match;
  }
  REQUIRE(gt_fg > 0);
  CHECK(double(match) / double(gt_fg) >= 0.95);

  // partition of the computed foreground: every masked voxel gets one zone
  std::size_t mask_fg = 0, labeled = 0;
  for (int z = 0; z < spec.nz; ++z)
    for (int y = 0; y < spec.ny; ++y)
      for (int x = 0; x < spec.nx; ++x) {
        if (masks[std::size_t(z)].at(x, y)) {
          ++mask_fg;
          if (zl.at(x, y, z) >= 1 && zl.at(x, y, z) <= 17) ++labeled;
        } else {
          CHECK(zl.at(x, y, z) == 0);
        }
      }
  CHECK(mask_fg == labeled);

  std::size_t cloud_total = 0;
  for (int zone = 1; zone <= 17; ++zone)
    cloud_total += extract_zone_points(zl, zone).size();
  CHECK(cloud_total == mask_fg);
}
