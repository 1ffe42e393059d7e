#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace rcd {

/// One layer's activations: `channels` planes of height x width values,
/// stored channel-major and row-major within a channel.
class FeatureMaps {
 public:
  FeatureMaps() = default;
  FeatureMaps(int channels, int height, int width, double fill = 0.0);
  FeatureMaps(int channels, int height, int width, std::vector<double> data);

  int channels() const { return channels_; }
  int height() const { return height_; }
  int width() const { return width_; }
  /// Pixels per channel (d_i in the usual notation).
  std::size_t pixels() const {
    return static_cast<std::size_t>(height_) * width_;
  }
  std::size_t size() const { return data_.size(); }

  double& at(int c, int y, int x) {
    return data_[(static_cast<std::size_t>(c) * height_ + y) * width_ + x];
  }
  double at(int c, int y, int x) const {
    return data_[(static_cast<std::size_t>(c) * height_ + y) * width_ + x];
  }

  std::span<double> channel(int c) {
    return {data_.data() + static_cast<std::size_t>(c) * pixels(), pixels()};
  }
  std::span<const double> channel(int c) const {
    return {data_.data() + static_cast<std::size_t>(c) * pixels(), pixels()};
  }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  bool same_shape(const FeatureMaps& other) const {
    return channels_ == other.channels_ && height_ == other.height_ &&
           width_ == other.width_;
  }

  friend bool operator==(const FeatureMaps&, const FeatureMaps&) = default;

 private:
  int channels_ = 0;
  int height_ = 0;
  int width_ = 0;
  std::vector<double> data_;
};

/// Square sliding-window geometry over an input plane. Each window holds
/// kernel*kernel slots; a slot is either an in-bounds pixel index or -1 for
/// a padding position (zero padding or a ceil-mode overhang).
class PatchIndex {
 public:
  static constexpr int kPadding = -1;

  PatchIndex() = default;
  PatchIndex(int input_height, int input_width, int kernel, int stride,
             int padding, bool ceil_mode = false);

  int kernel() const { return kernel_; }
  int stride() const { return stride_; }
  int padding() const { return padding_; }
  bool ceil_mode() const { return ceil_mode_; }
  int input_height() const { return in_h_; }
  int input_width() const { return in_w_; }
  int output_height() const { return out_h_; }
  int output_width() const { return out_w_; }
  /// Number of windows (d~_i); equals the output plane size.
  std::size_t patch_count() const {
    return static_cast<std::size_t>(out_h_) * out_w_;
  }
  int slots() const { return kernel_ * kernel_; }

  /// Slot s of window m, row-major within the window.
  int slot(std::size_t m, int s) const {
    return slots_[m * static_cast<std::size_t>(slots()) + s];
  }
  std::span<const int> window(std::size_t m) const {
    return {slots_.data() + m * static_cast<std::size_t>(slots()),
            static_cast<std::size_t>(slots())};
  }

  /// True when windows tile the input exactly: stride == kernel, no padding
  /// slots, every pixel covered once.
  bool is_partition() const;

  /// Output extent along one axis, or a value <= 0 when the window does not fit.
  static int output_extent(int input, int kernel, int stride, int padding,
                           bool ceil_mode);

 private:
  int in_h_ = 0, in_w_ = 0;
  int kernel_ = 0, stride_ = 1, padding_ = 0;
  bool ceil_mode_ = false;
  int out_h_ = 0, out_w_ = 0;
  std::vector<int> slots_;
};

/// Patched feature maps Y: rows = channels * kernel^2 (channel-major, then
/// row-major within the window), one column per window.
struct PatchedMaps {
  int rows = 0;
  int cols = 0;
  int out_height = 0;
  int out_width = 0;
  std::vector<double> data;  // rows x cols, row-major

  double at(int r, int c) const {
    return data[static_cast<std::size_t>(r) * cols + c];
  }
};

/// One convolutional layer's filter block: `count` filters of `length`
/// values each, stored filter-major.
struct FilterLayer {
  int count = 0;
  int length = 0;
  std::vector<double> values;

  std::span<const double> filter(int j) const {
    return {values.data() + static_cast<std::size_t>(j) * length,
            static_cast<std::size_t>(length)};
  }
  friend bool operator==(const FilterLayer&, const FilterLayer&) = default;
};

PatchedMaps extract_patches(const FeatureMaps& x, const PatchIndex& p);
FeatureMaps conv_forward(const PatchedMaps& y, const FilterLayer& filters);

/// Convenience: extract_patches followed by conv_forward.
FeatureMaps convolve(const FeatureMaps& x, const PatchIndex& p,
                     const FilterLayer& filters);

FeatureMaps relu(const FeatureMaps& x);
FeatureMaps leaky_relu(const FeatureMaps& x, double slope);

/// Padding slots are skipped, so the max is over in-bounds pixels only.
FeatureMaps max_pool(const FeatureMaps& x, const PatchIndex& p);
FeatureMaps l2_pool(const FeatureMaps& x, const PatchIndex& p);
/// Divides by the full window size (kernel^2) including padding slots.
FeatureMaps avg_pool(const FeatureMaps& x, const PatchIndex& p);

/// Each pixel becomes a factor x factor block holding the value at its
/// top-left slot and zeros elsewhere.
FeatureMaps upsample(const FeatureMaps& x, int factor);
/// Top-left aligned crop.
FeatureMaps crop(const FeatureMaps& x, int target_height, int target_width);
FeatureMaps channel_mean(const FeatureMaps& x);
FeatureMaps scale(const FeatureMaps& x, double c);

double squared_norm(std::span<const double> v);

}  // namespace rcd
