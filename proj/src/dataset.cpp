#include "zonescan/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "zonescan/error.hpp"
#include "zonescan/imgproc.hpp"
#include "zonescan/png_io.hpp"
#include "zonescan/util.hpp"

namespace zonescan {

std::string class_name(int class_id) {
  if (class_id < 0 || class_id >= kNumClasses)
    throw ValidationError("class id " + std::to_string(class_id) +
                          " outside 0..33");
  std::string name = "zone" + std::to_string(class_zone(class_id));
  if (class_is_threat(class_id)) name += "_threat";
  return name;
}

std::vector<int> DatasetManifest::class_counts() const {
  std::vector<int> counts(kNumClasses, 0);
  for (const auto& r : rows) ++counts[std::size_t(r.class_id)];
  return counts;
}

std::array<std::vector<int>, 3> DatasetManifest::split_class_counts() const {
  std::array<std::vector<int>, 3> out;
  for (auto& v : out) v.assign(kNumClasses, 0);
  for (const auto& r : rows) {
    int s = r.split == "train" ? 0 : r.split == "val" ? 1 : r.split == "test" ? 2 : -1;
    if (s >= 0) ++out[std::size_t(s)][std::size_t(r.class_id)];
  }
  return out;
}

SliceImage resize_bilinear(const SliceImage& src, int out_w, int out_h) {
  if (src.width < 1 || src.height < 1)
    throw ValidationError("resize_bilinear: empty image");
  SliceImage out(out_w, out_h);
  const double sx_scale = double(src.width) / out_w;
  const double sy_scale = double(src.height) / out_h;
  for (int oy = 0; oy < out_h; ++oy) {
    double sy = (oy + 0.5) * sy_scale - 0.5;
    sy = std::min(std::max(sy, 0.0), double(src.height - 1));
    const int y0 = int(sy);
    const int y1 = std::min(y0 + 1, src.height - 1);
    const double fy = sy - y0;
    for (int ox = 0; ox < out_w; ++ox) {
      double sx = (ox + 0.5) * sx_scale - 0.5;
      sx = std::min(std::max(sx, 0.0), double(src.width - 1));
      const int x0 = int(sx);
      const int x1 = std::min(x0 + 1, src.width - 1);
      const double fx = sx - x0;
      const double top = (1.0 - fx) * src.at(x0, y0) + fx * src.at(x1, y0);
      const double bot = (1.0 - fx) * src.at(x0, y1) + fx * src.at(x1, y1);
      out.at(ox, oy) = float((1.0 - fy) * top + fy * bot);
    }
  }
  return out;
}

SliceImage resize_to_256(const SliceImage& img) {
  if (img.width < 1 || img.height < 1)
    throw ValidationError("resize_to_256: empty image");
  const int s = std::max(img.width, img.height);
  if (img.width == s && img.height == s) {
    if (s == 256) return img;
    return resize_bilinear(img, 256, 256);
  }
  SliceImage square(s, s, 0.0f);
  const int off_u = (s - img.width) / 2;
  const int off_v = (s - img.height) / 2;
  for (int v = 0; v < img.height; ++v)
    for (int u = 0; u < img.width; ++u)
      square.at(u + off_u, v + off_v) = img.at(u, v);
  return resize_bilinear(square, 256, 256);
}

namespace {

struct ZoneSliceInfo {
  int min_u, min_v, max_u, max_v;
  int area = 0;
};

bool boxes_overlap(int a_lo, int a_hi, int b_lo, int b_hi) {
  return a_lo <= b_hi && b_lo <= a_hi;
}

}  // namespace

BuildResult build_samples(const ScanVolume& volume, const ZoneLabelVolume& zl,
                          const std::vector<ThreatAnnotation>& threats,
                          const std::string& out_dir,
                          const BuildParams& params) {
  if (volume.nx != zl.nx || volume.ny != zl.ny || volume.nz != zl.nz)
    throw ShapeError("build_samples: volume and zone labels are not aligned");

  BuildResult result;
  std::vector<bool> annotation_used(threats.size(), false);
  for (std::size_t i = 0; i < threats.size(); ++i) {
    const auto& a = threats[i];
    if (a.x_stop >= volume.nx || a.y_stop >= volume.ny || a.z_stop >= volume.nz)
      throw ValidationError("annotation box exceeds volume bounds for body " +
                            a.body_id);
  }

  ensure_dir(out_dir);

  for (int z = 0; z < volume.nz; ++z) {
    // zone occupancy in this slice
    std::map<int, ZoneSliceInfo> zones;
    for (int y = 0; y < volume.ny; ++y)
      for (int x = 0; x < volume.nx; ++x) {
        const int zone = zl.at(x, y, z);
        if (!zone) continue;
        auto it = zones.find(zone);
        if (it == zones.end()) {
          zones[zone] = {x, y, x, y, 1};
        } else {
          auto& info = it->second;
          info.min_u = std::min(info.min_u, x);
          info.min_v = std::min(info.min_v, y);
          info.max_u = std::max(info.max_u, x);
          info.max_v = std::max(info.max_v, y);
          ++info.area;
        }
      }
    if (zones.empty()) continue;

    SliceImage raw;
    for (const auto& [zone, info] : zones) {
      if (info.area < params.min_area) continue;
      if (raw.width == 0) raw = slice_xy(volume, z);

      // threat membership: same body and zone, z covered, (x, y) boxes overlap
      bool threat = false;
      for (std::size_t i = 0; i < threats.size(); ++i) {
        const auto& a = threats[i];
        if (a.body_id != volume.body_id || z < a.z_start || z > a.z_stop)
          continue;
        const bool xy_overlap =
            boxes_overlap(a.x_start, a.x_stop, info.min_u, info.max_u) &&
            boxes_overlap(a.y_start, a.y_stop, info.min_v, info.max_v);
        if (!xy_overlap) continue;
        if (a.zone == zone) {
          threat = true;
          annotation_used[i] = true;
        }
      }

      const int bw = info.max_u - info.min_u + 1;
      const int bh = info.max_v - info.min_v + 1;
      SliceImage crop(bw, bh);
      for (int v = 0; v < bh; ++v)
        for (int u = 0; u < bw; ++u) {
          const int x = u + info.min_u, y = v + info.min_v;
          crop.at(u, v) = zl.at(x, y, z) == zone ? raw.at(x, y) : 0.0f;
        }

      const SliceImage sized = resize_to_256(crop);
      const int class_id = class_id_for(zone, threat);
      const std::string dir_name = class_name(class_id);
      ensure_dir(path_join(out_dir, dir_name));

      char file[128];
      std::snprintf(file, sizeof(file), "%s_z%04d_zone%02d.png",
                    volume.body_id.c_str(), z, zone);
      const std::string rel = dir_name + "/" + file;
      write_gray_png(path_join(out_dir, rel), quantize_minmax(sized));

      DatasetSample s;
      s.image_path = rel;
      s.class_id = class_id;
      s.body_id = volume.body_id;
      s.z = z;
      result.samples.push_back(std::move(s));
    }
  }

  for (std::size_t i = 0; i < threats.size(); ++i) {
    const auto& a = threats[i];
    if (a.body_id == volume.body_id && !annotation_used[i])
      result.warnings.push_back(
          "annotation for body " + a.body_id + " zone " +
          std::to_string(a.zone) + " z [" + std::to_string(a.z_start) + "," +
          std::to_string(a.z_stop) + "] matched no sample; affected samples stay clean");
  }
  return result;
}

std::vector<std::string> split_dataset(DatasetManifest& manifest,
                                       std::array<double, 3> ratios,
                                       std::uint64_t seed) {
  for (double r : ratios)
    if (!(r > 0.0)) throw ParamError("split ratios must be positive");
  if (std::abs(ratios[0] + ratios[1] + ratios[2] - 1.0) > 1e-9)
    throw ParamError("split ratios must sum to 1");

  manifest.ratios = ratios;
  manifest.seed = seed;

  std::vector<std::vector<std::size_t>> by_class(kNumClasses);
  for (std::size_t i = 0; i < manifest.rows.size(); ++i) {
    const int c = manifest.rows[i].class_id;
    if (c < 0 || c >= kNumClasses)
      throw ValidationError("class id " + std::to_string(c) + " outside 0..33");
    by_class[std::size_t(c)].push_back(i);
  }

  std::vector<std::string> warnings;
  Rng rng(seed);
  for (int c = 0; c < kNumClasses; ++c) {
    auto& idx = by_class[std::size_t(c)];
    if (idx.empty()) continue;
    rng.shuffle(idx);
    const std::size_t n = idx.size();
    if (n < 3) {
      warnings.push_back("class " + class_name(c) + " has only " +
                         std::to_string(n) + " samples; all assigned to train");
      for (auto i : idx) manifest.rows[i].split = "train";
      continue;
    }
    std::size_t nt = std::size_t(std::floor(ratios[0] * double(n)));
    std::size_t nv = std::size_t(std::floor(ratios[1] * double(n)));
    const std::size_t ns = std::size_t(std::floor(ratios[2] * double(n)));
    std::size_t rem = n - nt - nv - ns;
    // remainders go train-first, then val, then test
    if (rem >= 1) {
      ++nt;
      --rem;
    }
    if (rem >= 1) {
      ++nv;
      --rem;
    }
    for (std::size_t i = 0; i < n; ++i) {
      auto& row = manifest.rows[idx[i]];
      row.split = i < nt ? "train" : i < nt + nv ? "val" : "test";
    }
  }
  return warnings;
}

SliceImage compute_mean_image(const DatasetManifest& manifest,
                              const std::string& root_dir) {
  std::vector<double> acc;
  int w = 0, h = 0;
  std::size_t n = 0;
  for (const auto& row : manifest.rows) {
    if (row.split != "train") continue;
    const GrayImage8 img = read_gray_png(path_join(root_dir, row.image_path));
    if (n == 0) {
      w = img.width;
      h = img.height;
      acc.assign(std::size_t(w) * h, 0.0);
    } else if (img.width != w || img.height != h) {
      throw ShapeError("train images disagree on dimensions");
    }
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += img.pixels[i];
    ++n;
  }
  if (n == 0) throw ValidationError("compute_mean_image: train split is empty");

  SliceImage mean(w, h);
  for (std::size_t i = 0; i < acc.size(); ++i)
    mean.pixels[i] = float(acc[i] / double(n));
  return mean;
}

int flip_class_id(int class_id) {
  static const int pairs[kNumZones + 1] = {0,  3, 4, 1, 2,  5,  7, 6, 10, 9,
                                           8, 12, 11, 14, 13, 16, 15, 17};
  const int zone = class_zone(class_id);
  return class_id_for(pairs[zone], class_is_threat(class_id));
}

AugmentedSample augment(const SliceImage& image, int class_id, AugmentKind kind,
                        double contrast_factor) {
  AugmentedSample out;
  switch (kind) {
    case AugmentKind::Flip: {
      out.image = SliceImage(image.width, image.height);
      for (int v = 0; v < image.height; ++v)
        for (int u = 0; u < image.width; ++u)
          out.image.at(u, v) = image.at(image.width - 1 - u, v);
      out.class_id = flip_class_id(class_id);
      return out;
    }
    case AugmentKind::Contrast: {
      double mean = 0.0;
      for (float v : image.pixels) mean += v;
      mean /= double(image.pixels.empty() ? 1 : image.pixels.size());
      out.image = SliceImage(image.width, image.height);
      for (std::size_t i = 0; i < image.pixels.size(); ++i) {
        const double v = mean + contrast_factor * (double(image.pixels[i]) - mean);
        out.image.pixels[i] = float(std::min(255.0, std::max(0.0, v)));
      }
      out.class_id = class_id;
      return out;
    }
  }
  throw ParamError("augment: unknown kind");
}

void write_manifest(const DatasetManifest& manifest, const std::string& path) {
  std::ostringstream out;
  out << "image_path,class_id,body_id,z,split\n";
  for (const auto& r : manifest.rows)
    out << r.image_path << ',' << r.class_id << ',' << r.body_id << ',' << r.z
        << ',' << r.split << "\n";
  atomic_write_file(path, out.str());
}

DatasetManifest read_manifest(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open manifest " + path);
  std::string line;
  if (!std::getline(f, line)) throw SchemaError("empty manifest " + path);
  if (trim(line) != "image_path,class_id,body_id,z,split")
    throw SchemaError("manifest header mismatch in " + path);

  DatasetManifest m;
  while (std::getline(f, line)) {
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto cols = split_csv_line(t);
    if (cols.size() != 5)
      throw SchemaError("expected 5 columns in manifest row: " + t);
    DatasetSample s;
    s.image_path = cols[0];
    s.class_id = parse_int(cols[1], "class_id");
    s.body_id = cols[2];
    s.z = parse_int(cols[3], "z");
    s.split = cols[4];
    if (s.class_id < 0 || s.class_id >= kNumClasses)
      throw ValidationError("class id outside 0..33 in manifest row: " + t);
    m.rows.push_back(std::move(s));
  }
  return m;
}

}  // namespace zonescan
