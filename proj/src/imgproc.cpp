#include "zonescan/imgproc.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "zonescan/error.hpp"

namespace zonescan {

namespace {

inline int clampi(int v, int lo, int hi) { return std::min(std::max(v, lo), hi); }

void check_dims_match(int w1, int h1, int w2, int h2, const char* what) {
  if (w1 != w2 || h1 != h2)
    throw ShapeError(std::string(what) + ": dimensions differ (" +
                     std::to_string(w1) + "x" + std::to_string(h1) + " vs " +
                     std::to_string(w2) + "x" + std::to_string(h2) + ")");
}

}  // namespace

SliceImage gaussian_smooth(const SliceImage& img, double sigma) {
  if (!(sigma > 0.0)) throw ParamError("gaussian_smooth: sigma must be > 0");
  const int w = img.width, h = img.height;
  const int r = int(std::ceil(3.0 * sigma));

  std::vector<double> kernel(std::size_t(2 * r + 1));
  double sum = 0.0;
  for (int i = -r; i <= r; ++i) {
    kernel[std::size_t(i + r)] = std::exp(-(double(i) * i) / (2.0 * sigma * sigma));
    sum += kernel[std::size_t(i + r)];
  }
  for (auto& k : kernel) k /= sum;

  // horizontal pass, edge replication
  std::vector<double> tmp(img.size());
  for (int v = 0; v < h; ++v) {
    const float* row = img.pixels.data() + std::size_t(v) * w;
    for (int u = 0; u < w; ++u) {
      double acc = 0.0;
      for (int i = -r; i <= r; ++i)
        acc += kernel[std::size_t(i + r)] * double(row[clampi(u + i, 0, w - 1)]);
      tmp[std::size_t(v) * w + u] = acc;
    }
  }

  SliceImage out(w, h);
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u) {
      double acc = 0.0;
      for (int i = -r; i <= r; ++i)
        acc += kernel[std::size_t(i + r)] * tmp[std::size_t(clampi(v + i, 0, h - 1)) * w + u];
      out.at(u, v) = float(acc);
    }
  return out;
}

BinaryMask threshold_global(const SliceImage& img, double T) {
  BinaryMask out(img.width, img.height);
  for (std::size_t i = 0; i < img.size(); ++i) {
    const double v = img.pixels[i];
    out.bits[i] = (v >= T && v > 0.0) ? 1 : 0;
  }
  return out;
}

BinaryMask threshold_sauvola(const SliceImage& img, int window, double k,
                             double R) {
  if (window < 3 || window % 2 == 0)
    throw ParamError("threshold_sauvola: window must be odd and >= 3");
  if (!(R > 0.0)) throw ParamError("threshold_sauvola: R must be > 0");

  const int w = img.width, h = img.height;
  const int r = window / 2;
  const int pw = w + 2 * r, ph = h + 2 * r;

  // Edge-replicated padding, then integral images. Sums stay exact for
  // integer-valued inputs, which is what the oracle equality tests rely on.
  std::vector<double> sum((std::size_t(pw) + 1) * (ph + 1), 0.0);
  std::vector<double> sumsq((std::size_t(pw) + 1) * (ph + 1), 0.0);
  for (int v = 0; v < ph; ++v) {
    const int sv = clampi(v - r, 0, h - 1);
    double rowsum = 0.0, rowsq = 0.0;
    for (int u = 0; u < pw; ++u) {
      const double x = img.at(clampi(u - r, 0, w - 1), sv);
      rowsum += x;
      rowsq += x * x;
      const std::size_t idx = std::size_t(v + 1) * (pw + 1) + (u + 1);
      sum[idx] = sum[idx - std::size_t(pw + 1)] + rowsum;
      sumsq[idx] = sumsq[idx - std::size_t(pw + 1)] + rowsq;
    }
  }

  const double n = double(window) * window;
  BinaryMask out(w, h);
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      // window [u, u+2r] x [v, v+2r] in padded coordinates
      const std::size_t a = std::size_t(v) * (pw + 1) + u;
      const std::size_t b = std::size_t(v + window) * (pw + 1) + u;
      const double s1 = sum[b + window] - sum[b] - sum[a + window] + sum[a];
      const double s2 = sumsq[b + window] - sumsq[b] - sumsq[a + window] + sumsq[a];
      const double mean = s1 / n;
      const double var = std::max(0.0, s2 / n - mean * mean);
      const double stddev = std::sqrt(var);
      const double T = mean * (1.0 + k * (stddev / R - 1.0));
      const double x = img.at(u, v);
      out.at(u, v) = (x >= T && x > 0.0) ? 1 : 0;
    }
  }
  return out;
}

BinaryMask dilate(const BinaryMask& mask, int radius) {
  if (radius < 1) throw ParamError("dilate: radius must be >= 1");
  const int w = mask.width, h = mask.height;

  // square structuring element is separable: rows, then columns
  BinaryMask tmp(w, h);
  for (int v = 0; v < h; ++v) {
    const std::uint8_t* row = mask.bits.data() + std::size_t(v) * w;
    std::uint8_t* trow = tmp.bits.data() + std::size_t(v) * w;
    for (int u = 0; u < w; ++u) {
      std::uint8_t on = 0;
      const int lo = std::max(0, u - radius), hi = std::min(w - 1, u + radius);
      for (int i = lo; i <= hi && !on; ++i) on = row[i];
      trow[u] = on;
    }
  }
  BinaryMask out(w, h);
  for (int u = 0; u < w; ++u) {
    for (int v = 0; v < h; ++v) {
      std::uint8_t on = 0;
      const int lo = std::max(0, v - radius), hi = std::min(h - 1, v + radius);
      for (int i = lo; i <= hi && !on; ++i) on = tmp.at(u, i);
      out.at(u, v) = on;
    }
  }
  return out;
}

BinaryMask reconstruct_by_dilation(const BinaryMask& seed,
                                   const BinaryMask& mask) {
  check_dims_match(seed.width, seed.height, mask.width, mask.height,
                   "reconstruct_by_dilation");
  const int w = mask.width, h = mask.height;
  for (std::size_t i = 0; i < seed.size(); ++i)
    if (seed.bits[i] && !mask.bits[i])
      throw ContainmentError(
          "reconstruct_by_dilation: seed not contained in mask");

  // Iterating (dilate by one, intersect with mask) to fixpoint is a flood
  // fill over the mask's 8-neighborhood graph starting from the seed pixels.
  BinaryMask out(w, h);
  std::vector<std::pair<int, int>> stack;
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u)
      if (seed.at(u, v) && !out.at(u, v)) {
        out.at(u, v) = 1;
        stack.emplace_back(u, v);
        while (!stack.empty()) {
          const auto [cu, cv] = stack.back();
          stack.pop_back();
          for (int dv = -1; dv <= 1; ++dv)
            for (int du = -1; du <= 1; ++du) {
              const int nu = cu + du, nv = cv + dv;
              if (nu < 0 || nv < 0 || nu >= w || nv >= h) continue;
              if (mask.at(nu, nv) && !out.at(nu, nv)) {
                out.at(nu, nv) = 1;
                stack.emplace_back(nu, nv);
              }
            }
        }
      }
  return out;
}

LabeledMask connected_components(const BinaryMask& mask, int connectivity) {
  if (connectivity != 4 && connectivity != 8)
    throw ParamError("connected_components: connectivity must be 4 or 8");
  const int w = mask.width, h = mask.height;

  LabeledMask out;
  out.width = w;
  out.height = h;
  out.labels.assign(mask.size(), 0);

  static const int d4[4][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
  static const int d8[8][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1},
                               {1, 1}, {1, -1}, {-1, 1}, {-1, -1}};
  const auto* dirs = connectivity == 4 ? d4 : d8;
  const int ndirs = connectivity;

  std::vector<std::pair<int, int>> stack;
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u) {
      if (!mask.at(u, v) || out.labels[std::size_t(v) * w + u]) continue;
      const std::int32_t label = ++out.count;
      ComponentStats st;
      st.min_u = st.max_u = u;
      st.min_v = st.max_v = v;
      double sum_u = 0, sum_v = 0;
      out.labels[std::size_t(v) * w + u] = label;
      stack.emplace_back(u, v);
      while (!stack.empty()) {
        const auto [cu, cv] = stack.back();
        stack.pop_back();
        ++st.area;
        sum_u += cu;
        sum_v += cv;
        st.min_u = std::min(st.min_u, cu);
        st.max_u = std::max(st.max_u, cu);
        st.min_v = std::min(st.min_v, cv);
        st.max_v = std::max(st.max_v, cv);
        for (int d = 0; d < ndirs; ++d) {
          const int nu = cu + dirs[d][0], nv = cv + dirs[d][1];
          if (nu < 0 || nv < 0 || nu >= w || nv >= h) continue;
          auto& cell = out.labels[std::size_t(nv) * w + nu];
          if (mask.at(nu, nv) && !cell) {
            cell = label;
            stack.emplace_back(nu, nv);
          }
        }
      }
      st.centroid_u = sum_u / st.area;
      st.centroid_v = sum_v / st.area;
      out.stats.push_back(st);
    }
  return out;
}

SliceImage mask_multiply(const SliceImage& raw, const BinaryMask& mask) {
  check_dims_match(raw.width, raw.height, mask.width, mask.height,
                   "mask_multiply");
  SliceImage out(raw.width, raw.height);
  for (std::size_t i = 0; i < raw.size(); ++i)
    out.pixels[i] = mask.bits[i] ? raw.pixels[i] : 0.0f;
  return out;
}

BinaryMask clean_slice_mask(const SliceImage& raw, const CleanupParams& params) {
  const SliceImage smooth = gaussian_smooth(raw, params.sigma);

  BinaryMask bw;
  if (params.use_sauvola) {
    double R = params.R;
    if (R <= 0.0) {
      float lo = raw.pixels.empty() ? 0.0f : raw.pixels[0], hi = lo;
      for (float v : raw.pixels) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      R = std::max(1e-6, double(hi - lo) / 2.0);
    }
    bw = threshold_sauvola(smooth, params.window, params.k, R);
  } else {
    double T = params.global_T;
    if (T <= 0.0) {
      float hi = 0.0f;
      for (float v : raw.pixels) hi = std::max(hi, v);
      T = hi / 2.0;
    }
    bw = threshold_global(smooth, T);
  }

  if (params.dilation_radius >= 1) bw = dilate(bw, params.dilation_radius);

  // Drop specks: reconstruct from the pixels of large-enough components.
  const LabeledMask cc = connected_components(bw, 8);
  BinaryMask seeds(bw.width, bw.height);
  bool any = false, all = true;
  for (std::size_t i = 0; i < bw.size(); ++i) {
    const std::int32_t l = cc.labels[i];
    if (!l) continue;
    if (cc.stats[std::size_t(l - 1)].area >= params.min_area) {
      seeds.bits[i] = 1;
      any = true;
    } else {
      all = false;
    }
  }
  if (!any) return BinaryMask(bw.width, bw.height);
  if (all) return bw;
  return reconstruct_by_dilation(seeds, bw);
}

}  // namespace zonescan
