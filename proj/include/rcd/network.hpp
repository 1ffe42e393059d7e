#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rcd/random_weights.hpp"
#include "rcd/tensor.hpp"

namespace rcd {

enum class LayerKind {
  conv,
  relu,
  leaky_relu,
  max_pool,
  l2_pool,
  avg_pool,
  upsample,
  crop,
  channel_mean,
  scale
};

std::string_view kind_name(LayerKind k);
LayerKind parse_kind(std::string_view name);

/// One layer descriptor. Only the fields relevant to `kind` are meaningful;
/// the named constructors set exactly those.
struct LayerSpec {
  LayerKind kind = LayerKind::relu;
  int kernel = 0;
  int stride = 1;
  int pad = 0;
  bool ceil = false;     // pools: caffe-style ceil output extent
  int out = 0;           // conv output channels
  double slope = 0.0;    // leaky_relu
  int factor = 0;        // upsample
  int height = 0;        // crop target
  int width = 0;         // crop target
  double value = 1.0;    // scale

  static LayerSpec conv(int kernel, int stride, int pad, int out);
  static LayerSpec relu();
  static LayerSpec leaky_relu(double slope);
  static LayerSpec pool(LayerKind kind, int kernel, int stride, int pad = 0, bool ceil = false);
  static LayerSpec upsample(int factor);
  static LayerSpec crop(int height, int width);
  static LayerSpec channel_mean();
  static LayerSpec scale(double value);

  bool is_pool() const;
  bool is_activation() const;
  PatchIndex patch_index(int in_height, int in_width) const;

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct Dims {
  int channels = 0;
  int height = 0;
  int width = 0;
  friend bool operator==(const Dims&, const Dims&) = default;
};

/// `empirical` applies layers verbatim. `def51` is the analysed random-CNN
/// variant: ReLU activations, every conv except the last rescaled by
/// 1/sqrt(out channels), and an arithmetic channel mean as the output head.
enum class Mode { empirical, def51 };

std::string_view mode_name(Mode m);

struct NetworkSpec {
  Dims input;
  Mode mode = Mode::empirical;
  std::vector<LayerSpec> layers;

  /// Input dims followed by the output dims of every layer. Throws ShapeError
  /// on any non-positive or inconsistent intermediate.
  std::vector<Dims> dim_trace() const;
  Dims output_dims() const { return dim_trace().back(); }

  /// Filter shapes of the conv layers in order.
  std::vector<FilterShape> filter_shapes() const;
  int conv_count() const;

  /// Dim trace plus per-kind parameter checks and the def51 structure rules.
  void validate() const;

  friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

std::vector<Dims> dim_trace(const NetworkSpec& spec);

/// Copy of `spec` with every conv emitting `channels` maps, except a conv
/// whose output is the network's final image in empirical mode.
NetworkSpec with_uniform_channels(const NetworkSpec& spec, int channels);

/// Per-layer activations (when retained) and the final image.
struct ForwardTrace {
  std::vector<FeatureMaps> layers;  // empty unless retention was requested
  FeatureMaps output;
};

ForwardTrace forward(const NetworkSpec& spec, const FilterBank& bank,
                     const FeatureMaps& x, bool retain_layers = false);

/// Samples a bank shaped for `spec` and runs it.
FeatureMaps run_random(const NetworkSpec& spec, const DistributionSpec& dist,
                       std::uint64_t seed, const FeatureMaps& x);

// ---- presets ---------------------------------------------------------------

enum class Activation { relu, leaky };

struct PresetOptions {
  std::optional<int> channel_override;
  /// Defaults to leaky ReLU 0.2 for vgg16/alexnet/simplified, ReLU for rrvgg.
  std::optional<Activation> activation;
  double leaky_slope = 0.2;
  /// Kernel side for rrvgg_conv1_1.
  int kernel = 3;
  /// Hidden width for rrvgg_conv1_1 unless channel_override is set.
  int conv1_1_channels = 64;
  /// Replace the final conv by a channel mean (the averaging variant).
  bool variant = false;
  Mode mode = Mode::empirical;
};

/// Encoder (random CNN up to the studied representation) and decoder (DCN
/// ending with the crop back to the input size).
struct PresetHalves {
  NetworkSpec encoder;
  NetworkSpec decoder;
};

/// Names: vgg16_conv<k>_deconv<k>, alexnet_conv<k>_deconv<k>, simplified_conv<k>
/// (k in 1..5), rrvgg_conv1_deconv1, rrvgg_conv1_deconv1_variant, rrvgg_conv1_1.
NetworkSpec build_preset(std::string_view name, Dims input,
                         const PresetOptions& options = {});
PresetHalves build_preset_halves(std::string_view name, Dims input,
                                 const PresetOptions& options = {});
std::vector<std::string> preset_names();

/// Index into dim_trace() of the representation the DCN inverts: the output
/// of the encoder's last activation (before its trailing pool, if any).
std::size_t representation_index(const PresetHalves& halves);

NetworkSpec concat(const NetworkSpec& first, const NetworkSpec& second);

// ---- JSON ------------------------------------------------------------------

std::string to_json(const NetworkSpec& spec, int indent = 2);
NetworkSpec network_from_json(std::string_view text);
NetworkSpec load_network(const std::string& path);

}  // namespace rcd
