#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "zonescan/image.hpp"
#include "zonescan/threat_table.hpp"
#include "zonescan/volume.hpp"

namespace zonescan {

// Class encoding: 0..16 = zones 1..17 clean, 17..33 = zones 1..17 with threat.
inline constexpr int kNumZones = 17;
inline constexpr int kNumClasses = 34;

inline int class_id_for(int zone, bool threat) {
  return zone - 1 + (threat ? kNumZones : 0);
}
inline bool class_is_threat(int class_id) { return class_id >= kNumZones; }
inline int class_zone(int class_id) { return class_id % kNumZones + 1; }
std::string class_name(int class_id);  // zone<k> or zone<k>_threat

struct DatasetSample {
  std::string image_path;  // relative to the dataset root
  int class_id = 0;
  std::string body_id;
  int z = 0;
  std::string split;  // "", "train", "val" or "test"
};

struct DatasetManifest {
  std::vector<DatasetSample> rows;
  std::array<double, 3> ratios{0.6, 0.2, 0.2};
  std::uint64_t seed = 0;

  std::array<std::vector<int>, 3> split_class_counts() const;  // per split
  std::vector<int> class_counts() const;
};

struct BuildParams {
  int min_area = 20;  // minimum zone pixels in a slice to emit a sample
};

struct BuildResult {
  std::vector<DatasetSample> samples;
  std::vector<std::string> warnings;
};

// Emits one 256x256 grayscale PNG per (slice, zone present in the slice):
// the zone's bounding box cropped out of raw*zone_mask, written under
// out_dir/zone<k>/ or out_dir/zone<k>_threat/. A sample is a threat sample iff
// an annotation with the same body and zone covers the slice's z and its
// (x, y) box overlaps the zone's bounding box in that slice.
BuildResult build_samples(const ScanVolume& volume, const ZoneLabelVolume& zl,
                          const std::vector<ThreatAnnotation>& threats,
                          const std::string& out_dir,
                          const BuildParams& params = {});

SliceImage resize_bilinear(const SliceImage& src, int out_w, int out_h);

// Zero-pads to a centered square, then resamples bilinearly to 256x256.
SliceImage resize_to_256(const SliceImage& img);

// Stratified per class: seeded shuffle, split sizes floor(ratio*n) with
// remainders handed out train-first. Classes with fewer than 3 samples go
// entirely to train (with a warning).
std::vector<std::string> split_dataset(DatasetManifest& manifest,
                                       std::array<double, 3> ratios,
                                       std::uint64_t seed);

// Per-pixel mean over the train split only.
SliceImage compute_mean_image(const DatasetManifest& manifest,
                              const std::string& root_dir);

enum class AugmentKind { Flip, Contrast };

struct AugmentedSample {
  SliceImage image;
  int class_id = 0;
};

// Flip mirrors horizontally and relabels through the left/right zone pairing
// (threat offset preserved); contrast pulls pixels toward the image mean by
// the given factor and leaves the class alone.
AugmentedSample augment(const SliceImage& image, int class_id, AugmentKind kind,
                        double contrast_factor = 0.8);

// 1<->3, 2<->4, 6<->7, 8<->10, 11<->12, 13<->14, 15<->16; 5, 9, 17 fixed.
int flip_class_id(int class_id);

// CSV: image_path,class_id,body_id,z,split. Written atomically.
void write_manifest(const DatasetManifest& manifest, const std::string& path);
DatasetManifest read_manifest(const std::string& path);

}  // namespace zonescan
