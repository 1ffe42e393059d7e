#include "rcd/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <string>

#include "rcd/error.hpp"

namespace rcd {
namespace {

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;

std::array<double, kWindow> gaussian_taps() {
  std::array<double, kWindow> w{};
  double sum = 0.0;
  for (int i = 0; i < kWindow; ++i) {
    const double d = i - kWindow / 2;
    w[static_cast<std::size_t>(i)] = std::exp(-d * d / (2.0 * kSigma * kSigma));
    sum += w[static_cast<std::size_t>(i)];
  }
  for (auto& v : w) v /= sum;
  return w;
}

void check_pair(const GrayImage& a, const GrayImage& b) {
  if (a.height() != b.height() || a.width() != b.width()) {
    throw ShapeError("images differ in size: " + std::to_string(a.height()) + "x" +
                     std::to_string(a.width()) + " vs " + std::to_string(b.height()) + "x" +
                     std::to_string(b.width()));
  }
  if (a.range() != b.range()) throw ParameterError("images have different dynamic ranges");
}

// Valid-mode separable gaussian filtering.
std::vector<double> blur_valid(const std::vector<double>& v, int h, int w,
                               const std::array<double, kWindow>& taps) {
  const int ow = w - kWindow + 1;
  const int oh = h - kWindow + 1;
  std::vector<double> rows(static_cast<std::size_t>(h) * ow);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int k = 0; k < kWindow; ++k) s += taps[static_cast<std::size_t>(k)] * v[static_cast<std::size_t>(y) * w + x + k];
      rows[static_cast<std::size_t>(y) * ow + x] = s;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(oh) * ow);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int k = 0; k < kWindow; ++k) s += taps[static_cast<std::size_t>(k)] * rows[static_cast<std::size_t>(y + k) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = s;
    }
  }
  return out;
}

}  // namespace

GrayImage::GrayImage(int height, int width, std::vector<double> values, double range)
    : height_(height), width_(width), range_(range), values_(std::move(values)) {
  if (height <= 0 || width <= 0) throw ShapeError("image dimensions must be positive");
  if (!(range > 0.0) || !std::isfinite(range)) throw ParameterError("dynamic range must be positive");
  if (values_.size() != static_cast<std::size_t>(height) * width) {
    throw ShapeError("image has " + std::to_string(values_.size()) + " values, expected " +
                     std::to_string(static_cast<std::size_t>(height) * width));
  }
  for (auto& v : values_) {
    if (std::isnan(v)) throw ParameterError("image contains NaN");
    v = std::clamp(v, 0.0, range_);
  }
}

GrayImage to_gray(const FeatureMaps& x, double range) {
  if (x.channels() == 1) return GrayImage(x.height(), x.width(), x.data(), range);
  if (x.channels() != 3) {
    throw ShapeError("grayscale conversion needs 1 or 3 channels, got " +
                     std::to_string(x.channels()));
  }
  const auto r = x.channel(0), g = x.channel(1), b = x.channel(2);
  std::vector<double> v(x.pixels());
  for (std::size_t p = 0; p < v.size(); ++p) v[p] = 0.299 * r[p] + 0.587 * g[p] + 0.114 * b[p];
  return GrayImage(x.height(), x.width(), std::move(v), range);
}

FeatureMaps normalize_minmax(const FeatureMaps& x) {
  FeatureMaps out = x;
  auto& d = out.data();
  if (d.empty()) return out;
  const auto [lo, hi] = std::minmax_element(d.begin(), d.end());
  const double a = *lo, span = *hi - *lo;
  for (auto& v : d) v = span > 0.0 ? (v - a) / span : 0.0;
  return out;
}

double pearson(const GrayImage& a, const GrayImage& b) {
  check_pair(a, b);
  const auto& x = a.values();
  const auto& y = b.values();
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  const auto constant = [](const std::vector<double>& v) {
    return std::adjacent_find(v.begin(), v.end(), std::not_equal_to<>()) == v.end();
  };
  if (constant(x) || constant(y) || sxx == 0.0 || syy == 0.0) {
    throw DegenerateInputError("pearson: constant image has zero variance");
  }
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double ssim_raw(const GrayImage& a, const GrayImage& b) {
  check_pair(a, b);
  if (a.height() < kWindow || a.width() < kWindow) {
    throw ParameterError("ssim needs images of at least 11x11, got " + std::to_string(a.height()) +
                         "x" + std::to_string(a.width()));
  }
  const int h = a.height(), w = a.width();
  const double c1 = (0.01 * a.range()) * (0.01 * a.range());
  const double c2 = (0.03 * a.range()) * (0.03 * a.range());
  const auto taps = gaussian_taps();
  const auto& x = a.values();
  const auto& y = b.values();
  std::vector<double> xx(x.size()), yy(x.size()), xy(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    xx[i] = x[i] * x[i];
    yy[i] = y[i] * y[i];
    xy[i] = x[i] * y[i];
  }
  const auto mu_x = blur_valid(x, h, w, taps);
  const auto mu_y = blur_valid(y, h, w, taps);
  const auto e_xx = blur_valid(xx, h, w, taps);
  const auto e_yy = blur_valid(yy, h, w, taps);
  const auto e_xy = blur_valid(xy, h, w, taps);
  double total = 0.0;
  for (std::size_t i = 0; i < mu_x.size(); ++i) {
    const double mx = mu_x[i], my = mu_y[i];
    const double vx = e_xx[i] - mx * mx;
    const double vy = e_yy[i] - my * my;
    const double cxy = e_xy[i] - mx * my;
    total += ((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
  }
  return total / static_cast<double>(mu_x.size());
}

GrayImage invert(const GrayImage& b) {
  std::vector<double> v = b.values();
  for (auto& p : v) p = b.range() - p;
  return GrayImage(b.height(), b.width(), std::move(v), b.range());
}

double ssim_reported(const GrayImage& a, const GrayImage& b) {
  double s = ssim_raw(a, b);
  if (s < 0.0) s = ssim_raw(a, invert(b));
  return std::clamp(s, 0.0, 1.0);
}

}  // namespace rcd
