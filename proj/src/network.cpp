#include "rcd/network.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "rcd/error.hpp"

namespace rcd {

using nlohmann::json;

namespace {

constexpr std::array<std::pair<LayerKind, std::string_view>, 10> kKindNames{{
    {LayerKind::conv, "conv"},
    {LayerKind::relu, "relu"},
    {LayerKind::leaky_relu, "leaky_relu"},
    {LayerKind::max_pool, "max_pool"},
    {LayerKind::l2_pool, "l2_pool"},
    {LayerKind::avg_pool, "avg_pool"},
    {LayerKind::upsample, "upsample"},
    {LayerKind::crop, "crop"},
    {LayerKind::channel_mean, "channel_mean"},
    {LayerKind::scale, "scale"},
}};

std::string where(std::size_t i, const LayerSpec& l) {
  return "layer " + std::to_string(i) + " (" + std::string(kind_name(l.kind)) + ")";
}

}  // namespace

std::string_view kind_name(LayerKind k) {
  for (const auto& [kind, name] : kKindNames) {
    if (kind == k) return name;
  }
  return "unknown";
}

LayerKind parse_kind(std::string_view name) {
  for (const auto& [kind, n] : kKindNames) {
    if (n == name) return kind;
  }
  throw ParameterError("unknown layer kind '" + std::string(name) + "'");
}

std::string_view mode_name(Mode m) { return m == Mode::def51 ? "def51" : "empirical"; }

LayerSpec LayerSpec::conv(int kernel, int stride, int pad, int out) {
  LayerSpec l;
  l.kind = LayerKind::conv;
  l.kernel = kernel;
  l.stride = stride;
  l.pad = pad;
  l.out = out;
  return l;
}

LayerSpec LayerSpec::relu() { return LayerSpec{}; }

LayerSpec LayerSpec::leaky_relu(double slope) {
  LayerSpec l;
  l.kind = LayerKind::leaky_relu;
  l.slope = slope;
  return l;
}

LayerSpec LayerSpec::pool(LayerKind kind, int kernel, int stride, int pad, bool ceil) {
  LayerSpec l;
  l.kind = kind;
  l.kernel = kernel;
  l.stride = stride;
  l.pad = pad;
  l.ceil = ceil;
  if (!l.is_pool()) throw ParameterError("LayerSpec::pool needs a pooling kind");
  return l;
}

LayerSpec LayerSpec::upsample(int factor) {
  LayerSpec l;
  l.kind = LayerKind::upsample;
  l.factor = factor;
  return l;
}

LayerSpec LayerSpec::crop(int height, int width) {
  LayerSpec l;
  l.kind = LayerKind::crop;
  l.height = height;
  l.width = width;
  return l;
}

LayerSpec LayerSpec::channel_mean() {
  LayerSpec l;
  l.kind = LayerKind::channel_mean;
  return l;
}

LayerSpec LayerSpec::scale(double value) {
  LayerSpec l;
  l.kind = LayerKind::scale;
  l.value = value;
  return l;
}

bool LayerSpec::is_pool() const {
  return kind == LayerKind::max_pool || kind == LayerKind::l2_pool ||
         kind == LayerKind::avg_pool;
}

bool LayerSpec::is_activation() const {
  return kind == LayerKind::relu || kind == LayerKind::leaky_relu;
}

PatchIndex LayerSpec::patch_index(int in_height, int in_width) const {
  return PatchIndex(in_height, in_width, kernel, stride, pad, is_pool() && ceil);
}

std::vector<Dims> NetworkSpec::dim_trace() const {
  if (input.channels <= 0 || input.height <= 0 || input.width <= 0) {
    throw ShapeError("network input dims must be positive");
  }
  std::vector<Dims> trace{input};
  trace.reserve(layers.size() + 1);
  Dims d = input;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    switch (l.kind) {
      case LayerKind::conv:
      case LayerKind::max_pool:
      case LayerKind::l2_pool:
      case LayerKind::avg_pool: {
        if (l.kernel <= 0 || l.stride <= 0 || l.pad < 0) {
          throw ShapeError(where(i, l) + ": kernel/stride must be > 0 and pad >= 0");
        }
        const bool ceil_mode = l.is_pool() && l.ceil;
        const int h = PatchIndex::output_extent(d.height, l.kernel, l.stride, l.pad, ceil_mode);
        const int w = PatchIndex::output_extent(d.width, l.kernel, l.stride, l.pad, ceil_mode);
        if (h <= 0 || w <= 0) {
          throw ShapeError(where(i, l) + ": window " + std::to_string(l.kernel) +
                           " does not fit " + std::to_string(d.height) + "x" +
                           std::to_string(d.width));
        }
        d.height = h;
        d.width = w;
        if (l.kind == LayerKind::conv) {
          if (l.out <= 0) throw ShapeError(where(i, l) + ": out channels must be > 0");
          d.channels = l.out;
        }
        break;
      }
      case LayerKind::upsample:
        if (l.factor < 1) throw ShapeError(where(i, l) + ": factor must be >= 1");
        d.height *= l.factor;
        d.width *= l.factor;
        break;
      case LayerKind::crop:
        if (l.height <= 0 || l.width <= 0 || l.height > d.height || l.width > d.width) {
          throw ShapeError(where(i, l) + ": target " + std::to_string(l.height) + "x" +
                           std::to_string(l.width) + " exceeds " +
                           std::to_string(d.height) + "x" + std::to_string(d.width));
        }
        d.height = l.height;
        d.width = l.width;
        break;
      case LayerKind::channel_mean:
        d.channels = 1;
        break;
      case LayerKind::relu:
      case LayerKind::leaky_relu:
      case LayerKind::scale:
        break;
    }
    trace.push_back(d);
  }
  return trace;
}

std::vector<Dims> dim_trace(const NetworkSpec& spec) { return spec.dim_trace(); }

std::vector<FilterShape> NetworkSpec::filter_shapes() const {
  const auto trace = dim_trace();
  std::vector<FilterShape> shapes;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    if (l.kind == LayerKind::conv) {
      shapes.push_back({l.out, trace[i].channels * l.kernel * l.kernel});
    }
  }
  return shapes;
}

int NetworkSpec::conv_count() const {
  return static_cast<int>(std::count_if(layers.begin(), layers.end(), [](const LayerSpec& l) {
    return l.kind == LayerKind::conv;
  }));
}

void NetworkSpec::validate() const {
  (void)dim_trace();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    if (l.kind == LayerKind::leaky_relu && !(l.slope >= 0.0 && l.slope < 1.0)) {
      throw ParameterError(where(i, l) + ": slope must lie in [0,1)");
    }
    if (l.kind == LayerKind::scale && !std::isfinite(l.value)) {
      throw ParameterError(where(i, l) + ": scale must be finite");
    }
  }
  if (mode != Mode::def51) return;

  // Structure ignoring crops: (conv relu | pool | upsample)* conv relu channel_mean.
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].kind != LayerKind::crop) idx.push_back(i);
  }
  if (idx.size() < 3 || layers[idx.back()].kind != LayerKind::channel_mean) {
    throw ParameterError("def51 network must end with channel_mean");
  }
  for (std::size_t n = 0; n < idx.size(); ++n) {
    const auto& l = layers[idx[n]];
    switch (l.kind) {
      case LayerKind::conv:
        if (n + 1 >= idx.size() || layers[idx[n + 1]].kind != LayerKind::relu) {
          throw ParameterError(where(idx[n], l) + ": def51 convs must be followed by relu");
        }
        break;
      case LayerKind::relu:
        if (n == 0 || layers[idx[n - 1]].kind != LayerKind::conv) {
          throw ParameterError(where(idx[n], l) + ": def51 relu must follow a conv");
        }
        break;
      case LayerKind::channel_mean:
        if (n + 1 != idx.size()) {
          throw ParameterError("def51 channel_mean must be the final layer");
        }
        if (n < 2 || layers[idx[n - 2]].kind != LayerKind::conv) {
          throw ParameterError("def51 channel_mean must follow the last conv + relu");
        }
        break;
      case LayerKind::leaky_relu:
        throw ParameterError(where(idx[n], l) + ": def51 mode uses plain relu");
      case LayerKind::scale:
        throw ParameterError(where(idx[n], l) +
                             ": def51 mode inserts its own 1/sqrt(N) scaling");
      default:
        break;
    }
  }
}

NetworkSpec with_uniform_channels(const NetworkSpec& spec, int channels) {
  if (channels <= 0) throw ParameterError("channel count must be positive");
  NetworkSpec out = spec;
  std::size_t last_conv = out.layers.size();
  for (std::size_t i = 0; i < out.layers.size(); ++i) {
    if (out.layers[i].kind == LayerKind::conv) last_conv = i;
  }
  bool keep_last = false;
  if (spec.mode == Mode::empirical && last_conv < out.layers.size()) {
    keep_last = std::none_of(out.layers.begin() + static_cast<std::ptrdiff_t>(last_conv),
                             out.layers.end(), [](const LayerSpec& l) {
                               return l.kind == LayerKind::channel_mean;
                             });
  }
  for (std::size_t i = 0; i < out.layers.size(); ++i) {
    if (out.layers[i].kind != LayerKind::conv) continue;
    if (keep_last && i == last_conv) continue;
    out.layers[i].out = channels;
  }
  return out;
}

ForwardTrace forward(const NetworkSpec& spec, const FilterBank& bank,
                     const FeatureMaps& x, bool retain_layers) {
  const auto trace = spec.dim_trace();
  if (x.channels() != spec.input.channels || x.height() != spec.input.height ||
      x.width() != spec.input.width) {
    throw ShapeError("forward: input is " + std::to_string(x.channels()) + "x" +
                     std::to_string(x.height()) + "x" + std::to_string(x.width()) +
                     " but the network expects " + std::to_string(spec.input.channels) +
                     "x" + std::to_string(spec.input.height) + "x" +
                     std::to_string(spec.input.width));
  }
  const auto shapes = spec.filter_shapes();
  if (shapes != bank.shapes()) {
    throw ShapeError("forward: filter bank shapes do not match the network (" +
                     std::to_string(bank.layers.size()) + " bank layers, " +
                     std::to_string(shapes.size()) + " conv layers)");
  }
  const bool def51 = spec.mode == Mode::def51;
  if (def51) spec.validate();
  const int convs = static_cast<int>(shapes.size());

  ForwardTrace result;
  FeatureMaps cur = x;
  int conv_index = 0;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& l = spec.layers[i];
    switch (l.kind) {
      case LayerKind::conv: {
        cur = convolve(cur, l.patch_index(cur.height(), cur.width()),
                       bank.layers[static_cast<std::size_t>(conv_index)]);
        if (def51 && conv_index + 1 < convs) {
          cur = scale(cur, 1.0 / std::sqrt(static_cast<double>(l.out)));
        }
        ++conv_index;
        break;
      }
      case LayerKind::relu: cur = relu(cur); break;
      case LayerKind::leaky_relu: cur = leaky_relu(cur, l.slope); break;
      case LayerKind::max_pool: cur = max_pool(cur, l.patch_index(cur.height(), cur.width())); break;
      case LayerKind::l2_pool: cur = l2_pool(cur, l.patch_index(cur.height(), cur.width())); break;
      case LayerKind::avg_pool: cur = avg_pool(cur, l.patch_index(cur.height(), cur.width())); break;
      case LayerKind::upsample: cur = upsample(cur, l.factor); break;
      case LayerKind::crop: cur = crop(cur, l.height, l.width); break;
      case LayerKind::channel_mean: cur = channel_mean(cur); break;
      case LayerKind::scale: cur = scale(cur, l.value); break;
    }
    if (retain_layers) result.layers.push_back(cur);
  }
  result.output = std::move(cur);
  return result;
}

FeatureMaps run_random(const NetworkSpec& spec, const DistributionSpec& dist,
                       std::uint64_t seed, const FeatureMaps& x) {
  const auto bank = sample_filterbank(dist, spec.filter_shapes(), seed);
  return forward(spec, bank, x).output;
}

NetworkSpec concat(const NetworkSpec& first, const NetworkSpec& second) {
  if (first.output_dims() != second.input) {
    throw ShapeError("concat: encoder output does not match decoder input");
  }
  NetworkSpec out = first;
  out.layers.insert(out.layers.end(), second.layers.begin(), second.layers.end());
  return out;
}

// ---- presets ---------------------------------------------------------------

namespace {

struct Block {
  int channels;
  int convs;
};

constexpr std::array<Block, 5> kVggBlocks{{{64, 2}, {128, 2}, {256, 3}, {512, 3}, {512, 3}}};

LayerSpec activation_layer(Activation a, double slope) {
  return a == Activation::relu ? LayerSpec::relu() : LayerSpec::leaky_relu(slope);
}

// Builds the decoder mirroring `encoder`: every pool or strided conv becomes
// an upsample, every conv becomes a stride-1 conv back to its input channels,
// and a crop restores the pre-pool extent at the end of each mirrored stage.
NetworkSpec mirror_decoder(const NetworkSpec& encoder, const LayerSpec& act, bool variant) {
  const auto trace = encoder.dim_trace();
  NetworkSpec dec;
  dec.input = trace.back();
  dec.mode = encoder.mode;

  Dims cur = dec.input;
  std::optional<Dims> pending_crop;
  auto flush_crop = [&] {
    if (pending_crop && (cur.height != pending_crop->height || cur.width != pending_crop->width)) {
      dec.layers.push_back(LayerSpec::crop(pending_crop->height, pending_crop->width));
      cur.height = pending_crop->height;
      cur.width = pending_crop->width;
    }
    pending_crop.reset();
  };
  auto emit_upsample = [&](const Dims& before, const Dims& after, int stride) {
    flush_crop();
    int factor = std::max(stride, 1);
    while (after.height * factor < before.height || after.width * factor < before.width) ++factor;
    dec.layers.push_back(LayerSpec::upsample(factor));
    cur.height *= factor;
    cur.width *= factor;
    pending_crop = before;
  };

  // Index of the conv that produces the decoder output.
  std::size_t first_conv = encoder.layers.size();
  for (std::size_t i = 0; i < encoder.layers.size(); ++i) {
    if (encoder.layers[i].kind == LayerKind::conv) {
      first_conv = i;
      break;
    }
  }

  for (std::size_t n = encoder.layers.size(); n-- > 0;) {
    const auto& l = encoder.layers[n];
    const Dims before = trace[n];
    const Dims after = trace[n + 1];
    if (l.is_pool()) {
      emit_upsample(before, after, l.stride);
    } else if (l.kind == LayerKind::conv) {
      if (l.stride > 1) emit_upsample(before, after, l.stride);
      if (n == first_conv && variant) {
        dec.layers.push_back(LayerSpec::channel_mean());
        cur.channels = 1;
      } else {
        dec.layers.push_back(LayerSpec::conv(l.kernel, 1, l.kernel / 2, before.channels));
        dec.layers.push_back(act);
        cur.channels = before.channels;
        cur.height = cur.height + 2 * (l.kernel / 2) - l.kernel + 1;
        cur.width = cur.width + 2 * (l.kernel / 2) - l.kernel + 1;
      }
    }
  }
  const Dims target = trace.front();
  if (cur.height < target.height || cur.width < target.width) {
    throw ShapeError("decoder output smaller than the input image");
  }
  dec.layers.push_back(LayerSpec::crop(target.height, target.width));
  return dec;
}

int parse_depth(std::string_view name, std::string_view prefix, std::string_view suffix_fmt) {
  // Accepts prefix + k + suffix where suffix_fmt contains '#' for k.
  if (name.substr(0, prefix.size()) != prefix) return 0;
  const auto rest = name.substr(prefix.size());
  if (rest.empty() || rest[0] < '1' || rest[0] > '5') return 0;
  const int k = rest[0] - '0';
  std::string suffix(suffix_fmt);
  for (auto& c : suffix) {
    if (c == '#') c = static_cast<char>('0' + k);
  }
  return rest.substr(1) == suffix ? k : 0;
}

}  // namespace

std::vector<std::string> preset_names() {
  std::vector<std::string> out;
  for (int k = 1; k <= 5; ++k) {
    out.push_back("vgg16_conv" + std::to_string(k) + "_deconv" + std::to_string(k));
  }
  for (int k = 1; k <= 5; ++k) {
    out.push_back("alexnet_conv" + std::to_string(k) + "_deconv" + std::to_string(k));
  }
  for (int k = 1; k <= 5; ++k) out.push_back("simplified_conv" + std::to_string(k));
  out.push_back("rrvgg_conv1_deconv1");
  out.push_back("rrvgg_conv1_deconv1_variant");
  out.push_back("rrvgg_conv1_1");
  return out;
}

PresetHalves build_preset_halves(std::string_view name, Dims input,
                                 const PresetOptions& options) {
  if (options.channel_override && *options.channel_override <= 0) {
    throw ParameterError("channel override must be positive");
  }
  const bool rr = name.substr(0, 5) == "rrvgg";
  const Activation act_kind =
      options.activation.value_or(rr || options.mode == Mode::def51 ? Activation::relu
                                                                    : Activation::leaky);
  const LayerSpec act = activation_layer(act_kind, options.leaky_slope);
  auto width = [&](int native) { return options.channel_override.value_or(native); };

  NetworkSpec enc;
  enc.input = input;
  enc.mode = options.mode;
  bool variant = options.variant;

  if (int k = parse_depth(name, "vgg16_conv", "_deconv#"); k > 0 || rr) {
    if (rr) {
      if (name == "rrvgg_conv1_deconv1") {
        k = 1;
      } else if (name == "rrvgg_conv1_deconv1_variant") {
        k = 1;
        variant = true;
      } else if (name == "rrvgg_conv1_1") {
        k = 0;
      } else {
        throw ParameterError("unknown preset '" + std::string(name) + "'");
      }
    }
    if (k == 0) {
      if (options.kernel <= 0) throw ParameterError("kernel must be positive");
      const int c = options.channel_override.value_or(options.conv1_1_channels);
      enc.layers.push_back(LayerSpec::conv(options.kernel, 1, options.kernel / 2, c));
      enc.layers.push_back(act);
    } else {
      for (int b = 0; b < k; ++b) {
        for (int j = 0; j < kVggBlocks[static_cast<std::size_t>(b)].convs; ++j) {
          enc.layers.push_back(LayerSpec::conv(3, 1, 1, width(kVggBlocks[static_cast<std::size_t>(b)].channels)));
          enc.layers.push_back(act);
        }
        enc.layers.push_back(LayerSpec::pool(LayerKind::max_pool, 2, 2, 0, true));
      }
    }
  } else if (int a = parse_depth(name, "alexnet_conv", "_deconv#"); a > 0) {
    struct AlexLayer {
      int kernel, stride, pad, channels;
      bool pool;
    };
    constexpr std::array<AlexLayer, 5> alex{{{11, 4, 2, 96, true},
                                             {5, 1, 2, 256, true},
                                             {3, 1, 1, 384, false},
                                             {3, 1, 1, 384, false},
                                             {3, 1, 1, 256, true}}};
    for (int i = 0; i < a; ++i) {
      const auto& s = alex[static_cast<std::size_t>(i)];
      enc.layers.push_back(LayerSpec::conv(s.kernel, s.stride, s.pad, width(s.channels)));
      enc.layers.push_back(act);
      if (s.pool) enc.layers.push_back(LayerSpec::pool(LayerKind::max_pool, 3, 2, 0, true));
    }
  } else if (name.substr(0, 15) == "simplified_conv" && name.size() == 16 && name[15] >= '1' &&
             name[15] <= '5') {
    const auto& blk = kVggBlocks[static_cast<std::size_t>(name[15] - '1')];
    for (int j = 0; j < blk.convs; ++j) {
      enc.layers.push_back(LayerSpec::conv(3, 1, 1, width(blk.channels)));
      enc.layers.push_back(act);
    }
  } else {
    throw ParameterError("unknown preset '" + std::string(name) + "'");
  }

  PresetHalves halves;
  halves.encoder = enc;
  (void)enc.dim_trace();
  halves.decoder = mirror_decoder(enc, act, variant);
  (void)halves.decoder.dim_trace();
  return halves;
}

NetworkSpec build_preset(std::string_view name, Dims input, const PresetOptions& options) {
  const auto halves = build_preset_halves(name, input, options);
  auto spec = concat(halves.encoder, halves.decoder);
  spec.validate();
  return spec;
}

std::size_t representation_index(const PresetHalves& halves) {
  const auto& layers = halves.encoder.layers;
  std::size_t n = layers.size();
  while (n > 0 && layers[n - 1].is_pool()) --n;
  return n;
}

// ---- JSON ------------------------------------------------------------------

namespace {

json layer_to_json(const LayerSpec& l) {
  json j;
  j["kind"] = kind_name(l.kind);
  switch (l.kind) {
    case LayerKind::conv:
      j["kernel"] = l.kernel;
      j["stride"] = l.stride;
      j["pad"] = l.pad;
      j["out"] = l.out;
      break;
    case LayerKind::max_pool:
    case LayerKind::l2_pool:
    case LayerKind::avg_pool:
      j["kernel"] = l.kernel;
      j["stride"] = l.stride;
      j["pad"] = l.pad;
      if (l.ceil) j["ceil"] = true;
      break;
    case LayerKind::leaky_relu: j["slope"] = l.slope; break;
    case LayerKind::upsample: j["factor"] = l.factor; break;
    case LayerKind::crop:
      j["height"] = l.height;
      j["width"] = l.width;
      break;
    case LayerKind::scale: j["value"] = l.value; break;
    case LayerKind::relu:
    case LayerKind::channel_mean: break;
  }
  return j;
}

template <typename T>
T required(const json& j, const char* key, std::size_t index) {
  if (!j.contains(key)) {
    throw ParameterError("layer " + std::to_string(index) + ": missing '" + key + "'");
  }
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ParameterError("layer " + std::to_string(index) + ": bad value for '" + key + "'");
  }
}

template <typename T>
T optional_value(const json& j, const char* key, T fallback, std::size_t index) {
  if (!j.contains(key)) return fallback;
  return required<T>(j, key, index);
}

LayerSpec layer_from_json(const json& j, std::size_t index) {
  if (!j.is_object()) throw ParameterError("layer " + std::to_string(index) + " is not an object");
  const auto kind = parse_kind(required<std::string>(j, "kind", index));
  LayerSpec l;
  std::vector<std::string> allowed{"kind"};
  switch (kind) {
    case LayerKind::conv:
      l = LayerSpec::conv(required<int>(j, "kernel", index), optional_value(j, "stride", 1, index),
                          optional_value(j, "pad", 0, index), required<int>(j, "out", index));
      allowed.insert(allowed.end(), {"kernel", "stride", "pad", "out"});
      break;
    case LayerKind::max_pool:
    case LayerKind::l2_pool:
    case LayerKind::avg_pool: {
      const int k = required<int>(j, "kernel", index);
      l = LayerSpec::pool(kind, k, optional_value(j, "stride", k, index),
                          optional_value(j, "pad", 0, index), optional_value(j, "ceil", false, index));
      allowed.insert(allowed.end(), {"kernel", "stride", "pad", "ceil"});
      break;
    }
    case LayerKind::relu: l = LayerSpec::relu(); break;
    case LayerKind::leaky_relu:
      l = LayerSpec::leaky_relu(optional_value(j, "slope", 0.2, index));
      allowed.push_back("slope");
      break;
    case LayerKind::upsample:
      l = LayerSpec::upsample(required<int>(j, "factor", index));
      allowed.push_back("factor");
      break;
    case LayerKind::crop:
      l = LayerSpec::crop(required<int>(j, "height", index), required<int>(j, "width", index));
      allowed.insert(allowed.end(), {"height", "width"});
      break;
    case LayerKind::channel_mean: l = LayerSpec::channel_mean(); break;
    case LayerKind::scale:
      l = LayerSpec::scale(required<double>(j, "value", index));
      allowed.push_back("value");
      break;
  }
  for (const auto& item : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), item.key()) == allowed.end()) {
      throw ParameterError("layer " + std::to_string(index) + " (" + std::string(kind_name(kind)) +
                           "): unexpected field '" + item.key() + "'");
    }
  }
  return l;
}

}  // namespace

std::string to_json(const NetworkSpec& spec, int indent) {
  json j;
  j["mode"] = mode_name(spec.mode);
  j["input"] = {spec.input.channels, spec.input.height, spec.input.width};
  j["layers"] = json::array();
  for (const auto& l : spec.layers) j["layers"].push_back(layer_to_json(l));
  return j.dump(indent);
}

NetworkSpec network_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParameterError(std::string("network JSON: ") + e.what());
  }
  if (!j.is_object()) throw ParameterError("network JSON must be an object");
  NetworkSpec spec;
  const std::string mode = j.value("mode", std::string("empirical"));
  if (mode == "empirical") {
    spec.mode = Mode::empirical;
  } else if (mode == "def51") {
    spec.mode = Mode::def51;
  } else {
    throw ParameterError("network JSON: unknown mode '" + mode + "'");
  }
  if (!j.contains("input") || !j["input"].is_array() || j["input"].size() != 3) {
    throw ParameterError("network JSON: 'input' must be [channels, height, width]");
  }
  try {
    spec.input = {j["input"][0].get<int>(), j["input"][1].get<int>(), j["input"][2].get<int>()};
  } catch (const json::exception&) {
    throw ParameterError("network JSON: 'input' entries must be integers");
  }
  if (!j.contains("layers") || !j["layers"].is_array()) {
    throw ParameterError("network JSON: 'layers' must be an array");
  }
  for (std::size_t i = 0; i < j["layers"].size(); ++i) {
    spec.layers.push_back(layer_from_json(j["layers"][i], i));
  }
  spec.validate();
  return spec;
}

NetworkSpec load_network(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open network file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return network_from_json(ss.str());
}

}  // namespace rcd
