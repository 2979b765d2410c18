#pragma once

#include "zonescan/image.hpp"

namespace zonescan {

// Separable Gaussian, kernel radius ceil(3*sigma), weights normalized to sum
// 1, borders edge-replicated.
SliceImage gaussian_smooth(const SliceImage& img, double sigma);

// c[u,v] = 1 iff I[u,v] >= T and I[u,v] > 0. The extra strict-positivity term
// keeps all-zero regions out of the foreground when T itself is <= 0.
BinaryMask threshold_global(const SliceImage& img, double T);

// Local threshold T(u,v) = m*(1 + k*(s/R - 1)) with m, s the mean and standard
// deviation over an odd window centered at (u,v), edge-replicated. The same
// foreground rule as threshold_global is applied against the local T.
BinaryMask threshold_sauvola(const SliceImage& img, int window, double k,
                             double R);

// Square structuring element of side 2*radius+1 (Chebyshev ball).
BinaryMask dilate(const BinaryMask& mask, int radius);

// Grows seed inside mask with 3x3 dilation steps until fixpoint; the result is
// the union of mask components touching the seed. Requires seed <= mask.
BinaryMask reconstruct_by_dilation(const BinaryMask& seed,
                                   const BinaryMask& mask);

LabeledMask connected_components(const BinaryMask& mask, int connectivity);

// Elementwise product; background stays exactly 0.
SliceImage mask_multiply(const SliceImage& raw, const BinaryMask& mask);

struct CleanupParams {
  double sigma = 1.2;
  bool use_sauvola = true;  // false = single global threshold
  int window = 15;
  double k = 0.2;
  double R = 0.0;           // <= 0: half the slice intensity range
  double global_T = 0.0;    // used when use_sauvola is false; <= 0: half max
  int dilation_radius = 1;
  int min_area = 20;
};

// Full per-slice cleanup: smooth, threshold, dilate, then drop small specks by
// reconstructing from the pixels of components with area >= min_area.
BinaryMask clean_slice_mask(const SliceImage& raw, const CleanupParams& params);

}  // namespace zonescan
