#include "rcd/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "rcd/error.hpp"
#include "rcd/gemm.hpp"

namespace rcd {
namespace {

std::string dims(int c, int h, int w) {
  return std::to_string(c) + "x" + std::to_string(h) + "x" +
         std::to_string(w);
}

void require_matches(const FeatureMaps& x, const PatchIndex& p,
                     const char* op) {
  if (x.height() != p.input_height() || x.width() != p.input_width()) {
    throw ShapeError(std::string(op) + ": patch index built for " +
                     std::to_string(p.input_height()) + "x" +
                     std::to_string(p.input_width()) + " but input is " +
                     dims(x.channels(), x.height(), x.width()));
  }
}

}  // namespace

FeatureMaps::FeatureMaps(int channels, int height, int width, double fill)
    : channels_(channels), height_(height), width_(width) {
  if (channels <= 0 || height <= 0 || width <= 0) {
    throw ShapeError("feature maps need positive dims, got " +
                     dims(channels, height, width));
  }
  data_.assign(static_cast<std::size_t>(channels) * height * width, fill);
}

FeatureMaps::FeatureMaps(int channels, int height, int width,
                         std::vector<double> data)
    : channels_(channels), height_(height), width_(width),
      data_(std::move(data)) {
  if (channels <= 0 || height <= 0 || width <= 0) {
    throw ShapeError("feature maps need positive dims, got " +
                     dims(channels, height, width));
  }
  if (data_.size() != static_cast<std::size_t>(channels) * height * width) {
    throw ShapeError("feature maps " + dims(channels, height, width) +
                     " given " + std::to_string(data_.size()) + " values");
  }
  for (double v : data_) {
    if (!std::isfinite(v)) throw ShapeError("feature maps contain non-finite values");
  }
}

int PatchIndex::output_extent(int input, int kernel, int stride, int padding,
                              bool ceil_mode) {
  const int span = input + 2 * padding - kernel;
  if (span < 0) return 0;
  if (!ceil_mode) return span / stride + 1;
  int out = (span + stride - 1) / stride + 1;
  // The last window must start inside the input or its leading padding.
  if ((out - 1) * stride >= input + padding) --out;
  return out;
}

PatchIndex::PatchIndex(int input_height, int input_width, int kernel,
                       int stride, int padding, bool ceil_mode)
    : in_h_(input_height), in_w_(input_width), kernel_(kernel),
      stride_(stride), padding_(padding), ceil_mode_(ceil_mode) {
  if (input_height <= 0 || input_width <= 0) {
    throw ShapeError("patch index needs a positive input plane");
  }
  if (kernel <= 0 || stride <= 0 || padding < 0) {
    throw ParameterError("patch index needs kernel > 0, stride > 0, padding >= 0");
  }
  out_h_ = output_extent(input_height, kernel, stride, padding, ceil_mode);
  out_w_ = output_extent(input_width, kernel, stride, padding, ceil_mode);
  if (out_h_ <= 0 || out_w_ <= 0) {
    throw ShapeError("window " + std::to_string(kernel) + " does not fit a " +
                     std::to_string(input_height) + "x" +
                     std::to_string(input_width) + " plane with padding " +
                     std::to_string(padding));
  }
  const int k2 = kernel * kernel;
  slots_.resize(patch_count() * static_cast<std::size_t>(k2));
  std::size_t pos = 0;
  for (int oy = 0; oy < out_h_; ++oy) {
    for (int ox = 0; ox < out_w_; ++ox) {
      const int y0 = oy * stride - padding;
      const int x0 = ox * stride - padding;
      for (int dy = 0; dy < kernel; ++dy) {
        for (int dx = 0; dx < kernel; ++dx) {
          const int y = y0 + dy;
          const int x = x0 + dx;
          const bool inside = y >= 0 && y < input_height && x >= 0 && x < input_width;
          slots_[pos++] = inside ? y * input_width + x : kPadding;
        }
      }
    }
  }
}

bool PatchIndex::is_partition() const {
  if (stride_ != kernel_) return false;
  if (std::find(slots_.begin(), slots_.end(), kPadding) != slots_.end()) {
    return false;
  }
  std::vector<char> seen(static_cast<std::size_t>(in_h_) * in_w_, 0);
  for (int s : slots_) {
    if (seen[s]) return false;
    seen[s] = 1;
  }
  return std::all_of(seen.begin(), seen.end(), [](char c) { return c != 0; });
}

PatchedMaps extract_patches(const FeatureMaps& x, const PatchIndex& p) {
  require_matches(x, p, "extract_patches");
  PatchedMaps y;
  const int k2 = p.slots();
  y.rows = x.channels() * k2;
  y.cols = static_cast<int>(p.patch_count());
  y.out_height = p.output_height();
  y.out_width = p.output_width();
  y.data.assign(static_cast<std::size_t>(y.rows) * y.cols, 0.0);
  for (int c = 0; c < x.channels(); ++c) {
    const auto plane = x.channel(c);
    for (int s = 0; s < k2; ++s) {
      double* row = y.data.data() + static_cast<std::size_t>(c * k2 + s) * y.cols;
      for (int m = 0; m < y.cols; ++m) {
        const int idx = p.slot(static_cast<std::size_t>(m), s);
        if (idx != PatchIndex::kPadding) row[m] = plane[idx];
      }
    }
  }
  return y;
}

FeatureMaps conv_forward(const PatchedMaps& y, const FilterLayer& filters) {
  if (filters.length != y.rows) {
    throw ShapeError("conv_forward: filter length " +
                     std::to_string(filters.length) + " but patches have " +
                     std::to_string(y.rows) + " rows");
  }
  if (filters.count <= 0 ||
      filters.values.size() !=
          static_cast<std::size_t>(filters.count) * filters.length) {
    throw ShapeError("conv_forward: malformed filter layer");
  }
  FeatureMaps out(filters.count, y.out_height, y.out_width);
  detail::gemm_accumulate(static_cast<std::size_t>(filters.count),
                          static_cast<std::size_t>(y.cols),
                          static_cast<std::size_t>(y.rows),
                          filters.values.data(), static_cast<std::size_t>(filters.length),
                          y.data.data(), static_cast<std::size_t>(y.cols),
                          out.data().data(), static_cast<std::size_t>(y.cols));
  return out;
}

FeatureMaps convolve(const FeatureMaps& x, const PatchIndex& p,
                     const FilterLayer& filters) {
  return conv_forward(extract_patches(x, p), filters);
}

FeatureMaps relu(const FeatureMaps& x) { return leaky_relu(x, 0.0); }

FeatureMaps leaky_relu(const FeatureMaps& x, double slope) {
  if (!(slope >= 0.0 && slope < 1.0)) {
    throw ParameterError("leaky_relu slope must lie in [0,1)");
  }
  FeatureMaps out = x;
  for (double& v : out.data()) {
    if (v < 0.0) v *= slope;
  }
  // -0.0 from slope 0 would break bitwise comparisons against relu oracles.
  if (slope == 0.0) {
    for (double& v : out.data()) {
      if (v == 0.0) v = 0.0;
    }
  }
  return out;
}

namespace {

template <typename Reduce>
FeatureMaps pool(const FeatureMaps& x, const PatchIndex& p, const char* op,
                 Reduce reduce) {
  require_matches(x, p, op);
  FeatureMaps out(x.channels(), p.output_height(), p.output_width());
  for (int c = 0; c < x.channels(); ++c) {
    const auto in = x.channel(c);
    auto dst = out.channel(c);
    for (std::size_t m = 0; m < p.patch_count(); ++m) {
      dst[m] = reduce(in, p.window(m));
    }
  }
  return out;
}

}  // namespace

FeatureMaps max_pool(const FeatureMaps& x, const PatchIndex& p) {
  return pool(x, p, "max_pool",
              [](std::span<const double> in, std::span<const int> w) {
                double best = -std::numeric_limits<double>::infinity();
                for (int idx : w) {
                  if (idx != PatchIndex::kPadding) best = std::max(best, in[idx]);
                }
                // A window made only of padding sees the zero padding value.
                return std::isfinite(best) ? best : 0.0;
              });
}

FeatureMaps l2_pool(const FeatureMaps& x, const PatchIndex& p) {
  return pool(x, p, "l2_pool",
              [](std::span<const double> in, std::span<const int> w) {
                double sum = 0.0;
                for (int idx : w) {
                  if (idx != PatchIndex::kPadding) sum += in[idx] * in[idx];
                }
                return std::sqrt(sum);
              });
}

FeatureMaps avg_pool(const FeatureMaps& x, const PatchIndex& p) {
  const double inv = 1.0 / p.slots();
  return pool(x, p, "avg_pool",
              [inv](std::span<const double> in, std::span<const int> w) {
                double sum = 0.0;
                for (int idx : w) {
                  if (idx != PatchIndex::kPadding) sum += in[idx];
                }
                return sum * inv;
              });
}

FeatureMaps upsample(const FeatureMaps& x, int factor) {
  if (factor < 1) throw ParameterError("upsample factor must be >= 1");
  if (factor == 1) return x;
  FeatureMaps out(x.channels(), x.height() * factor, x.width() * factor);
  for (int c = 0; c < x.channels(); ++c) {
    for (int y = 0; y < x.height(); ++y) {
      for (int xx = 0; xx < x.width(); ++xx) {
        out.at(c, y * factor, xx * factor) = x.at(c, y, xx);
      }
    }
  }
  return out;
}

FeatureMaps crop(const FeatureMaps& x, int target_height, int target_width) {
  if (target_height <= 0 || target_width <= 0 ||
      target_height > x.height() || target_width > x.width()) {
    throw ShapeError("crop target " + std::to_string(target_height) + "x" +
                     std::to_string(target_width) + " exceeds input " +
                     std::to_string(x.height()) + "x" +
                     std::to_string(x.width()));
  }
  if (target_height == x.height() && target_width == x.width()) return x;
  FeatureMaps out(x.channels(), target_height, target_width);
  for (int c = 0; c < x.channels(); ++c) {
    for (int y = 0; y < target_height; ++y) {
      for (int xx = 0; xx < target_width; ++xx) {
        out.at(c, y, xx) = x.at(c, y, xx);
      }
    }
  }
  return out;
}

FeatureMaps channel_mean(const FeatureMaps& x) {
  FeatureMaps out(1, x.height(), x.width());
  auto dst = out.channel(0);
  for (int c = 0; c < x.channels(); ++c) {
    const auto src = x.channel(c);
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  }
  const double inv = 1.0 / x.channels();
  for (double& v : dst) v *= inv;
  return out;
}

FeatureMaps scale(const FeatureMaps& x, double c) {
  FeatureMaps out = x;
  for (double& v : out.data()) v *= c;
  return out;
}

double squared_norm(std::span<const double> v) {
  double s = 0.0;
  for (double a : v) s += a * a;
  return s;
}

}  // namespace rcd
