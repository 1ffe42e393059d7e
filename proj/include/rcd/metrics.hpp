#pragma once

#include <vector>

#include "rcd/tensor.hpp"

namespace rcd {

/// Single-channel image with values clamped to [0, range].
class GrayImage {
 public:
  GrayImage() = default;
  GrayImage(int height, int width, std::vector<double> values, double range = 1.0);

  int height() const { return height_; }
  int width() const { return width_; }
  double range() const { return range_; }
  double at(int y, int x) const { return values_[static_cast<std::size_t>(y) * width_ + x]; }
  const std::vector<double>& values() const { return values_; }

 private:
  int height_ = 0;
  int width_ = 0;
  double range_ = 1.0;
  std::vector<double> values_;
};

/// BT.601 luma of a 3-channel image; 1-channel input passes through.
GrayImage to_gray(const FeatureMaps& x, double range = 1.0);

/// Rescales all values linearly onto [0, 1]; a constant image maps to 0.
FeatureMaps normalize_minmax(const FeatureMaps& x);

/// Flattened-pixel Pearson correlation; throws DegenerateInputError when
/// either image is constant.
double pearson(const GrayImage& a, const GrayImage& b);

/// Mean SSIM over all valid 11x11 gaussian windows (sigma 1.5).
double ssim_raw(const GrayImage& a, const GrayImage& b);

/// ssim_raw, but a negative score is recomputed against the inverted image
/// range - b and clamped to [0, 1].
double ssim_reported(const GrayImage& a, const GrayImage& b);

GrayImage invert(const GrayImage& b);

}  // namespace rcd
