#include <doctest.h>

#include <filesystem>
#include <set>

#include "oracles.hpp"
#include "test_helpers.hpp"
#include "zonescan/dataset.hpp"
#include "zonescan/error.hpp"
#include "zonescan/phantom.hpp"
#include "zonescan/png_io.hpp"
#include "zonescan/util.hpp"

using namespace zonescan;

TEST_CASE("class encoding") {
  CHECK(class_id_for(1, false) == 0);
  CHECK(class_id_for(17, false) == 16);
  CHECK(class_id_for(1, true) == 17);
  CHECK(class_id_for(14, true) == 30);
  CHECK(class_name(13) == "zone14");
  CHECK(class_name(30) == "zone14_threat");
  CHECK(class_zone(30) == 14);
  CHECK(class_is_threat(30));
  CHECK(!class_is_threat(13));
}

TEST_CASE("documented threat row drives the sample label") {
  TempDir dir("bs");
  // body 00360 with zone 14 present at z=100 (inside the annotation) and
  // z=200 (outside it)
  ScanVolume vol("00360", 400, 400, 201);
  ZoneLabelVolume zl(400, 400, 201);
  for (int z : {100, 200})
    for (int y = 350; y <= 373; ++y)
      for (int x = 290; x <= 340; ++x) {
        vol.at(x, y, z) = 100.0f + float((x + y + z) % 13);
        zl.at(x, y, z) = 14;
      }
  vol.recompute_range();

  ThreatAnnotation ann{"00360", 14, 88, 127, 290, 340, 350, 373};
  const BuildResult r = build_samples(vol, zl, {ann}, dir.str());
  REQUIRE(r.samples.size() == 2);

  CHECK(r.samples[0].z == 100);
  CHECK(r.samples[0].class_id == 30);
  CHECK(r.samples[0].image_path.rfind("zone14_threat/", 0) == 0);
  CHECK(r.samples[1].z == 200);
  CHECK(r.samples[1].class_id == 13);
  CHECK(r.samples[1].image_path.rfind("zone14/", 0) == 0);
  CHECK(r.warnings.empty());

  for (const auto& s : r.samples) {
    const GrayImage8 img = read_gray_png(path_join(dir.str(), s.image_path));
    CHECK(img.width == 256);
    CHECK(img.height == 256);
  }
}

TEST_CASE("zone-mismatched annotation warns and stays clean") {
  TempDir dir("bs2");
  ScanVolume vol("b", 40, 40, 10);
  ZoneLabelVolume zl(40, 40, 10);
  for (int y = 5; y < 20; ++y)
    for (int x = 5; x < 20; ++x) {
      vol.at(x, y, 4) = 90.0f;
      zl.at(x, y, 4) = 6;
    }
  vol.recompute_range();

  // the box overlaps, but it claims zone 7 which never appears
  ThreatAnnotation ann{"b", 7, 2, 8, 5, 19, 5, 19};
  const BuildResult r = build_samples(vol, zl, {ann}, dir.str());
  REQUIRE(r.samples.size() == 1);
  CHECK(r.samples[0].class_id == 5);  // zone 6, clean
  CHECK(r.warnings.size() == 1);
}

TEST_CASE("min_area filters small zone slices") {
  TempDir dir("bs3");
  ScanVolume vol("b", 32, 32, 3);
  ZoneLabelVolume zl(32, 32, 3);
  for (int x = 4; x < 8; ++x) {
    vol.at(x, 4, 1) = 50.0f;
    zl.at(x, 4, 1) = 2;  // area 4 < min_area
  }
  vol.recompute_range();
  BuildParams params;
  params.min_area = 20;
  CHECK(build_samples(vol, zl, {}, dir.str(), params).samples.empty());
}

TEST_CASE("bilinear resize identity and padding") {
  SliceImage img(256, 256);
  Rng rng(5);
  for (auto& p : img.pixels) p = float(rng.range(0, 255));
  const SliceImage same = resize_to_256(img);
  CHECK(same.pixels == img.pixels);

  // constant non-square image: mapped region keeps the value, padding is 0
  SliceImage rect(100, 50, 9.0f);
  const SliceImage out = resize_to_256(rect);
  CHECK(out.width == 256);
  CHECK(out.height == 256);
  CHECK(out.at(128, 128) == doctest::Approx(9.0f));  // interior of the content
  CHECK(out.at(128, 10) == doctest::Approx(0.0f));   // deep in the padding
  CHECK(out.at(128, 245) == doctest::Approx(0.0f));
}

TEST_CASE("bilinear upsample matches the direct oracle at probe points") {
  SliceImage checker(2, 2);
  checker.pixels = {10.0f, 200.0f, 200.0f, 10.0f};
  const SliceImage up = resize_bilinear(checker, 16, 16);
  Rng rng(9);
  for (int probe = 0; probe < 16; ++probe) {
    const int ox = rng.range(0, 15), oy = rng.range(0, 15);
    CHECK(double(up.at(ox, oy)) ==
          doctest::Approx(oracle::bilinear_at(checker, 16, 16, ox, oy))
              .epsilon(1e-6));
  }
}

namespace {

DatasetManifest synthetic_manifest(const std::vector<int>& class_sizes) {
  DatasetManifest m;
  for (int c = 0; c < int(class_sizes.size()); ++c)
    for (int i = 0; i < class_sizes[std::size_t(c)]; ++i) {
      DatasetSample s;
      s.image_path = class_name(c) + "/im" + std::to_string(i) + ".png";
      s.class_id = c;
      s.body_id = "b" + std::to_string(i % 7);
      s.z = i;
      m.rows.push_back(s);
    }
  return m;
}

}  // namespace

TEST_CASE("split sizes follow the floor rule with train-first remainders") {
  SUBCASE("exact division") {
    DatasetManifest m = synthetic_manifest({10});
    split_dataset(m, {0.6, 0.2, 0.2}, 1);
    const auto counts = m.split_class_counts();
    CHECK(counts[0][0] == 6);
    CHECK(counts[1][0] == 2);
    CHECK(counts[2][0] == 2);
  }
  SUBCASE("remainder goes to train first") {
    DatasetManifest m = synthetic_manifest({7});
    split_dataset(m, {0.6, 0.2, 0.2}, 1);
    const auto counts = m.split_class_counts();
    CHECK(counts[0][0] == 5);  // floor(4.2) + 1 remainder
    CHECK(counts[1][0] == 1);
    CHECK(counts[2][0] == 1);
  }
  SUBCASE("two remainders reach val") {
    DatasetManifest m = synthetic_manifest({9});
    split_dataset(m, {0.6, 0.2, 0.2}, 1);
    const auto counts = m.split_class_counts();
    CHECK(counts[0][0] == 6);  // floor(5.4) + 1
    CHECK(counts[1][0] == 2);  // floor(1.8) + 1
    CHECK(counts[2][0] == 1);
  }
  SUBCASE("tiny classes go wholly to train with a warning") {
    DatasetManifest m = synthetic_manifest({2});
    const auto warnings = split_dataset(m, {0.6, 0.2, 0.2}, 1);
    CHECK(warnings.size() == 1);
    CHECK(m.split_class_counts()[0][0] == 2);
  }
  SUBCASE("bad ratios are rejected") {
    DatasetManifest m = synthetic_manifest({4});
    CHECK_THROWS_AS(split_dataset(m, {0.6, 0.2, 0.1}, 1), ParamError);
    CHECK_THROWS_AS(split_dataset(m, {1.0, 0.0, 0.0}, 1), ParamError);
  }
}

TEST_CASE("split is a deterministic stratified partition") {
  std::vector<int> sizes(kNumClasses);
  Rng rng(13);
  for (auto& s : sizes) s = rng.range(3, 400);

  DatasetManifest a = synthetic_manifest(sizes);
  DatasetManifest b = synthetic_manifest(sizes);
  split_dataset(a, {0.6, 0.2, 0.2}, 99);
  split_dataset(b, {0.6, 0.2, 0.2}, 99);
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    CHECK(!a.rows[i].split.empty());  // every sample lands in one split
    CHECK(a.rows[i].split == b.rows[i].split);
  }

  DatasetManifest c = synthetic_manifest(sizes);
  split_dataset(c, {0.6, 0.2, 0.2}, 100);
  bool any_differs = false;
  for (std::size_t i = 0; i < a.rows.size(); ++i)
    any_differs = any_differs || a.rows[i].split != c.rows[i].split;
  CHECK(any_differs);

  // per-class counts stay within one sample of the exact ratios
  const auto counts = a.split_class_counts();
  for (int cid = 0; cid < kNumClasses; ++cid) {
    const double n = sizes[std::size_t(cid)];
    CHECK(std::abs(counts[0][std::size_t(cid)] - 0.6 * n) <= 1.0);
    CHECK(std::abs(counts[1][std::size_t(cid)] - 0.2 * n) <= 1.0);
    CHECK(std::abs(counts[2][std::size_t(cid)] - 0.2 * n) <= 1.0);
  }
}

TEST_CASE("manifest CSV roundtrip") {
  TempDir dir("mf");
  DatasetManifest m = synthetic_manifest({3, 4});
  split_dataset(m, {0.6, 0.2, 0.2}, 5);
  const std::string p = dir.file("manifest.csv");
  write_manifest(m, p);
  const DatasetManifest back = read_manifest(p);
  REQUIRE(back.rows.size() == m.rows.size());
  for (std::size_t i = 0; i < m.rows.size(); ++i) {
    CHECK(back.rows[i].image_path == m.rows[i].image_path);
    CHECK(back.rows[i].class_id == m.rows[i].class_id);
    CHECK(back.rows[i].body_id == m.rows[i].body_id);
    CHECK(back.rows[i].z == m.rows[i].z);
    CHECK(back.rows[i].split == m.rows[i].split);
  }
}

namespace {

void write_const_png(const std::string& path, int value) {
  GrayImage8 img(256, 256, std::uint8_t(value));
  write_gray_png(path, img);
}

}  // namespace

TEST_CASE("mean image averages the train split only") {
  TempDir dir("mean");
  std::filesystem::create_directories(dir.path / "zone1");

  DatasetManifest m;
  auto add = [&](const std::string& name, int value, const std::string& split) {
    write_const_png(dir.file("zone1/" + name), value);
    DatasetSample s;
    s.image_path = "zone1/" + name;
    s.class_id = 0;
    s.body_id = "b";
    s.z = int(m.rows.size());
    s.split = split;
    m.rows.push_back(s);
  };
  add("a.png", 0, "train");
  add("b.png", 10, "train");
  add("c.png", 250, "test");

  const SliceImage mean = compute_mean_image(m, dir.str());
  CHECK(mean.width == 256);
  for (float p : mean.pixels) CHECK(p == doctest::Approx(5.0f));

  SUBCASE("single-image train split") {
    DatasetManifest one;
    one.rows = {m.rows[1]};
    const SliceImage m1 = compute_mean_image(one, dir.str());
    for (float p : m1.pixels) CHECK(p == doctest::Approx(10.0f));
  }
  SUBCASE("empty train split is an error") {
    DatasetManifest none;
    none.rows = {m.rows[2]};
    CHECK_THROWS_AS(compute_mean_image(none, dir.str()), ValidationError);
  }
  SUBCASE("perturbing a test image leaves the mean bit-identical") {
    const SliceImage before = compute_mean_image(m, dir.str());
    write_const_png(dir.file("zone1/c.png"), 3);
    const SliceImage after = compute_mean_image(m, dir.str());
    CHECK(before.pixels == after.pixels);
  }
}

TEST_CASE("mean image matches a naive accumulation oracle") {
  TempDir dir("mean2");
  std::filesystem::create_directories(dir.path / "zone1");
  Rng rng(21);
  DatasetManifest m;
  std::vector<double> acc(16 * 16, 0.0);
  for (int i = 0; i < 100; ++i) {
    GrayImage8 img(16, 16);
    for (auto& p : img.pixels) p = std::uint8_t(rng.range(0, 255));
    const std::string rel = "zone1/r" + std::to_string(i) + ".png";
    write_gray_png(dir.file(rel), img);
    for (std::size_t j = 0; j < acc.size(); ++j) acc[j] += img.pixels[j];
    DatasetSample s;
    s.image_path = rel;
    s.class_id = 0;
    s.body_id = "b";
    s.z = i;
    s.split = "train";
    m.rows.push_back(s);
  }
  const SliceImage mean = compute_mean_image(m, dir.str());
  for (std::size_t j = 0; j < acc.size(); ++j)
    CHECK(double(mean.pixels[j]) == doctest::Approx(acc[j] / 100.0).epsilon(1e-5));
}

TEST_CASE("flip augmentation mirrors pixels and relabels") {
  SliceImage img(4, 2);
  img.pixels = {1, 2, 3, 4, 5, 6, 7, 8};
  const AugmentedSample flipped = augment(img, 30, AugmentKind::Flip);
  CHECK(flipped.class_id == 29);  // zone 14 threat -> zone 13 threat
  CHECK(flipped.image.pixels == std::vector<float>{4, 3, 2, 1, 8, 7, 6, 5});

  const AugmentedSample twice =
      augment(flipped.image, flipped.class_id, AugmentKind::Flip);
  CHECK(twice.class_id == 30);
  CHECK(twice.image.pixels == img.pixels);

  // fixed zones stay fixed
  CHECK(flip_class_id(class_id_for(5, false)) == class_id_for(5, false));
  CHECK(flip_class_id(class_id_for(9, true)) == class_id_for(9, true));
  CHECK(flip_class_id(class_id_for(17, false)) == class_id_for(17, false));
  // involution over all 34 classes
  for (int c = 0; c < kNumClasses; ++c) {
    CHECK(flip_class_id(flip_class_id(c)) == c);
    CHECK(class_is_threat(flip_class_id(c)) == class_is_threat(c));
  }
}

TEST_CASE("contrast augmentation pulls pixels toward the mean") {
  SliceImage img(3, 1);
  img.pixels = {0, 100, 200};
  const AugmentedSample out = augment(img, 4, AugmentKind::Contrast, 0.8);
  CHECK(out.class_id == 4);
  CHECK(out.image.pixels[0] == doctest::Approx(20.0f));
  CHECK(out.image.pixels[1] == doctest::Approx(100.0f));
  CHECK(out.image.pixels[2] == doctest::Approx(180.0f));

  SliceImage flat(5, 5, 42.0f);
  const AugmentedSample same = augment(flat, 0, AugmentKind::Contrast, 0.8);
  for (float p : same.image.pixels) CHECK(p == doctest::Approx(42.0f));
}

TEST_CASE("paper-scale bodies extrapolate to a corpus-sized dataset") {
  // one full-resolution phantom; 200 of these should land within an order of
  // magnitude of a few hundred thousand samples
  PhantomSpec spec;
  spec.body_id = "ps";
  spec.nx = 512;
  spec.ny = 512;
  spec.nz = 660;
  spec.height_voxels = 600;
  spec.z_offset = 20;
  spec.torso_radius = 100;
  spec.limb_radius = 36;
  spec.seed = 17;
  const PhantomResult r = generate_phantom(spec);

  TempDir dir("ps");
  const BuildResult b = build_samples(r.volume, r.zones, {}, dir.str());
  const double projected = double(b.samples.size()) * 200.0;
  CHECK(projected > 1e5);
  CHECK(projected < 1e6);
}

TEST_CASE("atomic writes never leave partial files behind") {
  TempDir dir("atomic");
  const std::string good = dir.file("out.csv");
  atomic_write_file(good, "hello\n");
  CHECK(read_text_file(good) == "hello\n");
  CHECK(!file_exists(good + ".tmp"));

  const std::string blocked = dir.file("no_such_dir/out.csv");
  CHECK_THROWS_AS(atomic_write_file(blocked, "x"), IoError);
  CHECK(!file_exists(blocked));
  CHECK(!file_exists(blocked + ".tmp"));
}

TEST_CASE("manifest class counts agree with the files on disk") {
  TempDir dir("cnt");
  ScanVolume vol("b", 48, 48, 12);
  ZoneLabelVolume zl(48, 48, 12);
  // two zones across a few slices
  for (int z = 2; z < 10; ++z)
    for (int y = 10; y < 28; ++y) {
      for (int x = 6; x < 22; ++x) {
        vol.at(x, y, z) = 80.0f;
        zl.at(x, y, z) = 11;
      }
      for (int x = 26; x < 42; ++x) {
        vol.at(x, y, z) = 80.0f;
        zl.at(x, y, z) = 12;
      }
    }
  vol.recompute_range();
  const BuildResult r = build_samples(vol, zl, {}, dir.str());

  DatasetManifest m;
  m.rows = r.samples;
  const auto counts = m.class_counts();
  for (int c = 0; c < kNumClasses; ++c) {
    std::size_t on_disk = 0;
    const auto sub = dir.path / class_name(c);
    if (std::filesystem::is_directory(sub))
      for (const auto& e : std::filesystem::directory_iterator(sub))
        on_disk += e.is_regular_file() ? 1 : 0;
    CHECK(on_disk == std::size_t(counts[std::size_t(c)]));
  }
}
