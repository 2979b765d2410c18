#pragma once

#include <cstdint>
#include <string>
#include <tuple>
#include <vector>

#include "zonescan/threat_table.hpp"
#include "zonescan/volume.hpp"
#include "zonescan/zone_table.hpp"

namespace zonescan {

// Stylized standing body: two leg cylinders, a pelvis ellipse across the groin
// band, an elliptical torso with two arm cylinders at the sides, and a head
// cylinder on top. Cross-section eccentricities differ per band and between
// the left and right side so that every zone crop has a recognizable shape.
struct PhantomSpec {
  std::string body_id = "phantom";
  int nx = 56, ny = 56, nz = 48;
  int height_voxels = 40;
  int z_offset = 4;          // first body slice
  int torso_radius = 11;     // torso semi-axis in x, voxels
  int limb_radius = 4;       // nominal leg radius, voxels
  double foreground_intensity = 100.0;
  double noise_sigma = 2.0;  // additive Gaussian on body voxels, clipped at 0
  int threat_count = 0;
  double threat_intensity_boost = 30.0;
  std::uint64_t seed = 0;
  ZoneBandTable table = ZoneBandTable::defaults();
};

struct PhantomResult {
  ScanVolume volume;
  ZoneLabelVolume zones;  // generator ground truth
  std::vector<ThreatAnnotation> threats;
};

PhantomResult generate_phantom(const PhantomSpec& spec);

}  // namespace zonescan
