#include "zonescan/phantom.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "zonescan/error.hpp"
#include "zonescan/util.hpp"

namespace zonescan {

namespace {

// Per-band leg cross-section eccentricity. The left leg is elongated along x
// and the right leg along y, so left/right zone crops stay distinguishable
// after they are cropped and rescaled.
double leg_ecc(int band) { return 0.25 + 0.20 * band; }

// Torso height-to-width aspect per torso band (cycling for custom tables).
double torso_aspect(int bands_above_groin) {
  static const double kAspects[3] = {0.58, 0.72, 0.86};
  return kAspects[bands_above_groin % 3];
}

struct BodyShape {
  double cx, cy;
  double torso_rx, leg_r, arm_r, leg_dx, arm_dx;
  double pelvis_rx, pelvis_ry, head_r;
  double g_lo, g_hi, head_lo;  // groin/head anchors in relative height
};

inline bool in_ellipse(double x, double y, double cx, double cy, double rx,
                       double ry) {
  const double dx = (x - cx) / rx;
  const double dy = (y - cy) / ry;
  return dx * dx + dy * dy <= 1.0;
}

BodyShape make_shape(const PhantomSpec& spec, Rng& rng) {
  BodyShape s;
  s.cx = spec.nx / 2.0 + rng.uniform(-1.5, 1.5);
  s.cy = spec.ny / 2.0 + rng.uniform(-1.5, 1.5);
  s.torso_rx = spec.torso_radius * rng.uniform(0.92, 1.08);
  s.leg_r = spec.limb_radius * rng.uniform(0.92, 1.08);
  s.arm_r = std::max(1.6, 0.72 * spec.limb_radius * rng.uniform(0.92, 1.08));

  const auto& table = spec.table;
  const auto& groin = table.bands[std::size_t(table.groin_band)];
  s.g_lo = groin.h_lo;
  s.g_hi = groin.h_hi;
  s.head_lo = table.bands.back().h_lo;

  s.leg_dx = 0.62 * s.torso_rx;
  const double leg_max = s.leg_r * (1.0 + leg_ecc(table.groin_band));
  s.pelvis_rx = std::max(1.18 * s.torso_rx, s.leg_dx + leg_max * 0.8);
  s.pelvis_ry = 0.62 * s.torso_rx;
  s.arm_dx = s.torso_rx + 2.0 + s.arm_r;
  s.head_r = std::max(2.5, 0.42 * s.torso_rx);
  return s;
}

void check_bounds(const PhantomSpec& spec, const BodyShape& s) {
  const auto& table = spec.table;
  double ext_x = std::max({s.arm_dx + s.arm_r, s.pelvis_rx, s.torso_rx});
  double leg_max = s.leg_r * (1.0 + leg_ecc(std::max(0, table.groin_band - 1)));
  ext_x = std::max(ext_x, s.leg_dx + leg_max);
  double ext_y = std::max({s.pelvis_ry, s.head_r, leg_max,
                           torso_aspect(0) * s.torso_rx,
                           torso_aspect(1) * s.torso_rx,
                           torso_aspect(2) * s.torso_rx});
  if (s.cx - ext_x < 1.0 || s.cx + ext_x > spec.nx - 2.0 ||
      s.cy - ext_y < 1.0 || s.cy + ext_y > spec.ny - 2.0)
    throw BoundsError("phantom limbs exceed the grid: need nx > " +
                      std::to_string(int(2 * ext_x) + 4) + ", ny > " +
                      std::to_string(int(2 * ext_y) + 4));
}

// Rasterizes the foreground of one slice at relative height h.
void rasterize_slice(const PhantomSpec& spec, const BodyShape& s, double h,
                     int band, std::vector<std::uint8_t>& fg) {
  const auto& table = spec.table;
  const int nx = spec.nx, ny = spec.ny;
  std::fill(fg.begin(), fg.end(), 0);

  auto mark_ellipse = [&](double cx, double cy, double rx, double ry) {
    const int x0 = std::max(0, int(std::floor(cx - rx)));
    const int x1 = std::min(nx - 1, int(std::ceil(cx + rx)));
    const int y0 = std::max(0, int(std::floor(cy - ry)));
    const int y1 = std::min(ny - 1, int(std::ceil(cy + ry)));
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x)
        if (in_ellipse(x, y, cx, cy, rx, ry)) fg[std::size_t(y) * nx + x] = 1;
  };

  if (band < table.groin_band) {
    const double e = leg_ecc(band);
    // subject's right = low x
    mark_ellipse(s.cx - s.leg_dx, s.cy, s.leg_r, s.leg_r * (1.0 + e));
    mark_ellipse(s.cx + s.leg_dx, s.cy, s.leg_r * (1.0 + e), s.leg_r);
  } else if (band == table.groin_band) {
    mark_ellipse(s.cx, s.cy, s.pelvis_rx, s.pelvis_ry);
  } else if (h < s.head_lo) {
    const double aspect = torso_aspect(band - table.groin_band - 1);
    mark_ellipse(s.cx, s.cy, s.torso_rx, aspect * s.torso_rx);
    mark_ellipse(s.cx - s.arm_dx, s.cy, s.arm_r, s.arm_r);
    mark_ellipse(s.cx + s.arm_dx, s.cy, s.arm_r, s.arm_r);
  } else {
    mark_ellipse(s.cx, s.cy, s.head_r, s.head_r);
  }
}

}  // namespace

PhantomResult generate_phantom(const PhantomSpec& spec) {
  spec.table.validate();
  if (spec.nx < 8 || spec.ny < 8 || spec.nz < 1)
    throw ValidationError("phantom grid too small");
  if (spec.height_voxels < int(spec.table.bands.size()))
    throw ValidationError("phantom height must cover every band");
  if (spec.z_offset < 0 || spec.z_offset + spec.height_voxels > spec.nz)
    throw BoundsError("phantom height does not fit the grid z extent");
  if (spec.threat_count < 0)
    throw ValidationError("threat_count must be >= 0");
  if (spec.threat_intensity_boost <= 0.0)
    throw ValidationError("threat_intensity_boost must be positive");
  if (spec.noise_sigma < 0.0)
    throw ValidationError("noise_sigma must be >= 0");

  Rng rng(spec.seed);
  const BodyShape shape = make_shape(spec, rng);
  check_bounds(spec, shape);

  const int nx = spec.nx, ny = spec.ny, nz = spec.nz;
  const int z0 = spec.z_offset;
  const int z1 = z0 + spec.height_voxels - 1;

  PhantomResult out;
  out.zones = ZoneLabelVolume(nx, ny, nz);

  // Ground-truth labels: band from relative height, side against the body's
  // geometric midline, zone 9 in the groin band's central strip.
  std::vector<std::uint8_t> fg(std::size_t(nx) * ny);
  for (int z = z0; z <= z1; ++z) {
    const double h = (z1 == z0) ? 0.0 : double(z - z0) / double(z1 - z0);
    const int band = spec.table.band_index(h);
    rasterize_slice(spec, shape, h, band, fg);

    int min_x = nx, max_x = -1;
    for (int y = 0; y < ny; ++y)
      for (int x = 0; x < nx; ++x)
        if (fg[std::size_t(y) * nx + x]) {
          min_x = std::min(min_x, x);
          max_x = std::max(max_x, x);
        }
    if (max_x < 0) continue;
    const double width = max_x - min_x + 1;
    const double half_strip = spec.table.strip_fraction * width / 2.0;
    const auto& b = spec.table.bands[std::size_t(band)];

    for (int y = 0; y < ny; ++y)
      for (int x = 0; x < nx; ++x) {
        if (!fg[std::size_t(y) * nx + x]) continue;
        std::uint8_t zone;
        if (band == spec.table.groin_band &&
            std::abs(x - shape.cx) <= half_strip)
          zone = std::uint8_t(spec.table.groin_zone);
        else
          zone = std::uint8_t(x < shape.cx ? b.right_zone : b.left_zone);
        out.zones.at(x, y, z) = zone;
      }
  }

  // Threat boxes: pick a zone, grow a small box around one of its voxels and
  // accept only when the whole box stays inside that zone (and clear of the
  // boxes already placed).
  std::array<std::vector<std::array<int, 3>>, 18> zone_voxels;
  for (int z = z0; z <= z1; ++z)
    for (int y = 0; y < ny; ++y)
      for (int x = 0; x < nx; ++x) {
        const std::uint8_t zl = out.zones.at(x, y, z);
        if (zl) zone_voxels[zl].push_back({x, y, z});
      }

  std::vector<std::uint8_t> boost(std::size_t(nx) * ny * nz, 0);
  for (int t = 0; t < spec.threat_count; ++t) {
    bool placed = false;
    for (int attempt = 0; attempt < 500 && !placed; ++attempt) {
      const int zone = rng.range(1, 17);
      const auto& vox = zone_voxels[std::size_t(zone)];
      if (vox.empty()) continue;
      const auto c = vox[std::size_t(rng.below(vox.size()))];
      const int hx = rng.range(1, 3);
      const int hy = rng.range(1, 3);
      const int hz = rng.range(1, 4);
      const int xa = c[0] - hx, xb = c[0] + hx;
      const int ya = c[1] - hy, yb = c[1] + hy;
      const int za = c[2] - hz, zb = c[2] + hz;
      if (xa < 0 || ya < 0 || za < 0 || xb >= nx || yb >= ny || zb >= nz)
        continue;
      bool ok = true;
      for (int z = za; z <= zb && ok; ++z)
        for (int y = ya; y <= yb && ok; ++y)
          for (int x = xa; x <= xb && ok; ++x) {
            const std::size_t idx = (std::size_t(z) * ny + y) * nx + x;
            if (out.zones.labels[idx] != zone || boost[idx]) ok = false;
          }
      if (!ok) continue;
      for (int z = za; z <= zb; ++z)
        for (int y = ya; y <= yb; ++y)
          for (int x = xa; x <= xb; ++x)
            boost[(std::size_t(z) * ny + y) * nx + x] = 1;
      ThreatAnnotation a;
      a.body_id = spec.body_id;
      a.zone = zone;
      a.z_start = za;
      a.z_stop = zb;
      a.x_start = xa;
      a.x_stop = xb;
      a.y_start = ya;
      a.y_stop = yb;
      out.threats.push_back(a);
      placed = true;
    }
    if (!placed)
      throw PlacementError("failed to place threat " + std::to_string(t + 1) +
                           " after bounded retries");
  }

  // Intensities: background stays exactly 0; body voxels get the foreground
  // level (plus the boost inside threat boxes) with additive Gaussian noise,
  // clipped at 0.
  out.volume = ScanVolume(spec.body_id, nx, ny, nz);
  for (int z = 0; z < nz; ++z)
    for (int y = 0; y < ny; ++y)
      for (int x = 0; x < nx; ++x) {
        const std::size_t idx = (std::size_t(z) * ny + y) * nx + x;
        if (!out.zones.labels[idx]) continue;
        double v = spec.foreground_intensity;
        if (boost[idx]) v += spec.threat_intensity_boost;
        v += spec.noise_sigma * rng.normal();
        out.volume.voxels[idx] = float(std::max(0.0, v));
      }
  out.volume.recompute_range();
  return out;
}

}  // namespace zonescan
