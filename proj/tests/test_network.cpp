#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "rcd/error.hpp"
#include "rcd/network.hpp"

using namespace rcd;

namespace {

FeatureMaps random_maps(int c, int h, int w, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(0.0, 1.0);
  FeatureMaps x(c, h, w);
  for (auto& v : x.data()) v = d(rng);
  return x;
}

// Plain-array reference for the empirical rrVGG Conv1-DeConv1 network.
using Planes = std::vector<std::vector<std::vector<double>>>;

Planes conv_same3(const Planes& in, const FilterLayer& f, double slope) {
  const int c_in = static_cast<int>(in.size());
  const int h = static_cast<int>(in[0].size());
  const int w = static_cast<int>(in[0][0].size());
  Planes out(static_cast<std::size_t>(f.count), std::vector<std::vector<double>>(h, std::vector<double>(w, 0.0)));
  for (int j = 0; j < f.count; ++j)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double s = 0;
        for (int c = 0; c < c_in; ++c)
          for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
              const int yy = y + dy, xx = x + dx;
              if (yy < 0 || xx < 0 || yy >= h || xx >= w) continue;
              s += f.values[static_cast<std::size_t>(j * c_in * 9 + c * 9 + (dy + 1) * 3 + dx + 1)] * in[c][yy][xx];
            }
        out[j][y][x] = s > 0 ? s : slope * s;
      }
  return out;
}

}  // namespace

TEST_CASE("dim trace and Table 1 shapes") {
  const Dims input{3, 227, 227};
  const int expect_hw[] = {227, 114, 57, 29, 15};
  const int expect_c[] = {64, 128, 256, 512, 512};
  for (int k = 1; k <= 5; ++k) {
    const auto halves = build_preset_halves("vgg16_conv" + std::to_string(k) + "_deconv" + std::to_string(k), input);
    const auto trace = halves.encoder.dim_trace();
    const Dims rep = trace[representation_index(halves)];
    CHECK(rep.channels == expect_c[k - 1]);
    CHECK(rep.height == expect_hw[k - 1]);
    CHECK(rep.width == expect_hw[k - 1]);
    CHECK(halves.decoder.output_dims() == input);
  }
  NetworkSpec s;
  s.input = {1, 8, 8};
  s.layers = {LayerSpec::pool(LayerKind::max_pool, 2, 2), LayerSpec::upsample(2)};
  const auto t = s.dim_trace();
  CHECK(t[1] == Dims{1, 4, 4});
  CHECK(t[2] == Dims{1, 8, 8});
}

TEST_CASE("preset structure") {
  const auto spec = build_preset("rrvgg_conv1_deconv1", {1, 32, 32});
  std::vector<LayerKind> kinds;
  for (const auto& l : spec.layers) kinds.push_back(l.kind);
  const std::vector<LayerKind> want{LayerKind::conv, LayerKind::relu, LayerKind::conv, LayerKind::relu,
                                    LayerKind::max_pool, LayerKind::upsample, LayerKind::conv, LayerKind::relu,
                                    LayerKind::conv, LayerKind::relu, LayerKind::crop};
  CHECK(kinds == want);

  PresetOptions o;
  o.channel_override = 4;
  const auto narrow = build_preset("vgg16_conv2_deconv2", {3, 32, 32}, o);
  for (std::size_t i = 0; i + 1 < narrow.layers.size(); ++i) {
    const auto& l = narrow.layers[i];
    if (l.kind != LayerKind::conv) continue;
    const bool output_conv = std::none_of(narrow.layers.begin() + static_cast<std::ptrdiff_t>(i) + 1,
                                          narrow.layers.end(), [](const LayerSpec& x) { return x.kind == LayerKind::conv; });
    CHECK(l.out == (output_conv ? 3 : 4));
  }
  CHECK(narrow.output_dims() == Dims{3, 32, 32});

  const auto variant = build_preset("rrvgg_conv1_deconv1_variant", {1, 32, 32});
  CHECK(variant.layers[variant.layers.size() - 2].kind == LayerKind::channel_mean);
  CHECK(variant.output_dims() == Dims{1, 32, 32});

  // leaky relu 0.2 by default outside rrvgg
  const auto alex = build_preset("alexnet_conv1_deconv1", {3, 67, 67});
  CHECK(alex.layers[1].kind == LayerKind::leaky_relu);
  CHECK(alex.layers[1].slope == 0.2);
  CHECK(alex.output_dims() == Dims{3, 67, 67});

  PresetOptions k7;
  k7.kernel = 7;
  const auto c11 = build_preset("rrvgg_conv1_1", {1, 16, 16}, k7);
  CHECK(c11.layers[0].kernel == 7);
  CHECK(c11.layers[0].pad == 3);
  CHECK(c11.output_dims() == Dims{1, 16, 16});

  for (const auto& name : preset_names()) CHECK_NOTHROW(build_preset(name, {3, 64, 64}));
  CHECK_THROWS_AS(build_preset("vgg19", {3, 32, 32}), ParameterError);
  CHECK_THROWS_AS(build_preset("vgg16_conv5_deconv5", {3, 8, 8}), ShapeError);
}

TEST_CASE("def51 validation") {
  NetworkSpec s;
  s.input = {1, 4, 4};
  s.mode = Mode::def51;
  s.layers = {LayerSpec::conv(2, 2, 0, 3), LayerSpec::relu(), LayerSpec::channel_mean()};
  CHECK_NOTHROW(s.validate());
  auto bad = s;
  bad.layers.pop_back();
  CHECK_THROWS_AS(bad.validate(), ParameterError);
  bad = s;
  bad.layers[1] = LayerSpec::leaky_relu(0.1);
  CHECK_THROWS_AS(bad.validate(), ParameterError);
  bad = s;
  bad.layers.insert(bad.layers.begin() + 2, LayerSpec::scale(2.0));
  CHECK_THROWS_AS(bad.validate(), ParameterError);
  auto cropped = s;
  cropped.layers.insert(cropped.layers.begin() + 2, LayerSpec::crop(1, 1));
  CHECK_NOTHROW(cropped.validate());
}

TEST_CASE("def51 forward: single filter, scaling and homogeneity") {
  NetworkSpec s;
  s.input = {1, 3, 3};
  s.mode = Mode::def51;
  s.layers = {LayerSpec::conv(3, 1, 1, 1), LayerSpec::relu(), LayerSpec::channel_mean()};
  const auto x = random_maps(1, 3, 3, 1);
  auto bank = sample_filterbank(DistributionSpec::gaussian(1), s.filter_shapes(), 4);
  const auto out = forward(s, bank, x).output;
  const auto patches = extract_patches(x, PatchIndex(3, 3, 3, 1, 1));
  for (int m = 0; m < 9; ++m) {
    double dot = 0;
    for (int r = 0; r < 9; ++r) dot += bank.layers[0].values[static_cast<std::size_t>(r)] * patches.at(r, m);
    CHECK(out.data()[static_cast<std::size_t>(m)] == doctest::Approx(std::max(dot, 0.0)));
  }
  auto doubled = bank;
  for (auto& v : doubled.layers[0].values) v *= 2;
  const auto out2 = forward(s, doubled, x).output;
  for (std::size_t i = 0; i < out.size(); ++i) CHECK(out2.data()[i] == doctest::Approx(2 * out.data()[i]));

  CHECK(squared_norm(forward(s, bank, FeatureMaps(1, 3, 3)).output.data()) == 0.0);

  // def51 = empirical + 1/sqrt(N) after the hidden conv
  NetworkSpec deep = s;
  deep.layers = {LayerSpec::conv(3, 1, 1, 5), LayerSpec::relu(), LayerSpec::conv(3, 1, 1, 7), LayerSpec::relu(),
                 LayerSpec::channel_mean()};
  NetworkSpec emp = deep;
  emp.mode = Mode::empirical;
  emp.layers.insert(emp.layers.begin() + 1, LayerSpec::scale(1 / std::sqrt(5.0)));
  const auto b2 = sample_filterbank(DistributionSpec::gaussian(1), deep.filter_shapes(), 8);
  const auto a = forward(deep, b2, x).output;
  const auto e = forward(emp, b2, x).output;
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.data()[i] == doctest::Approx(e.data()[i]).epsilon(1e-14));
}

TEST_CASE("empirical rrVGG forward matches a straight-line reference") {
  PresetOptions o;
  o.channel_override = 3;
  const auto spec = build_preset("rrvgg_conv1_deconv1", {1, 8, 8}, o);
  const auto bank = sample_filterbank(DistributionSpec::gaussian(0.5), spec.filter_shapes(), 21);
  const auto x = random_maps(1, 8, 8, 2);
  const auto got = forward(spec, bank, x).output;

  Planes p(1, std::vector<std::vector<double>>(8, std::vector<double>(8)));
  for (int y = 0; y < 8; ++y)
    for (int xx = 0; xx < 8; ++xx) p[0][y][xx] = x.at(0, y, xx);
  p = conv_same3(p, bank.layers[0], 0);
  p = conv_same3(p, bank.layers[1], 0);
  Planes pooled(p.size(), std::vector<std::vector<double>>(4, std::vector<double>(4)));
  for (std::size_t c = 0; c < p.size(); ++c)
    for (int y = 0; y < 4; ++y)
      for (int xx = 0; xx < 4; ++xx)
        pooled[c][y][xx] = std::max({p[c][2 * y][2 * xx], p[c][2 * y + 1][2 * xx], p[c][2 * y][2 * xx + 1],
                                     p[c][2 * y + 1][2 * xx + 1]});
  Planes up(p.size(), std::vector<std::vector<double>>(8, std::vector<double>(8, 0.0)));
  for (std::size_t c = 0; c < p.size(); ++c)
    for (int y = 0; y < 4; ++y)
      for (int xx = 0; xx < 4; ++xx) up[c][2 * y][2 * xx] = pooled[c][y][xx];
  up = conv_same3(up, bank.layers[2], 0);
  up = conv_same3(up, bank.layers[3], 0);
  REQUIRE(got.channels() == 1);
  for (int y = 0; y < 8; ++y)
    for (int xx = 0; xx < 8; ++xx) CHECK(got.at(0, y, xx) == doctest::Approx(up[0][y][xx]).epsilon(1e-12));
}

TEST_CASE("forward rejects mismatches") {
  const auto spec = build_preset("rrvgg_conv1_1", {1, 8, 8});
  const auto bank = sample_filterbank(DistributionSpec::gaussian(1), spec.filter_shapes(), 1);
  CHECK_THROWS_AS(forward(spec, bank, FeatureMaps(1, 9, 8)), ShapeError);
  auto wrong = bank;
  wrong.layers.pop_back();
  CHECK_THROWS_AS(forward(spec, wrong, FeatureMaps(1, 8, 8)), ShapeError);
}

TEST_CASE("uniform channels keep the image-producing conv") {
  const auto spec = build_preset("rrvgg_conv1_deconv1", {3, 16, 16});
  const auto wide = with_uniform_channels(spec, 9);
  CHECK(wide.output_dims() == Dims{3, 16, 16});
  NetworkSpec d51;
  d51.input = {1, 4, 4};
  d51.mode = Mode::def51;
  d51.layers = {LayerSpec::conv(2, 2, 0, 1), LayerSpec::relu(), LayerSpec::channel_mean()};
  CHECK(with_uniform_channels(d51, 17).layers[0].out == 17);
}

TEST_CASE("JSON round trip and schema errors") {
  const auto spec = build_preset("alexnet_conv2_deconv2", {3, 67, 67});
  CHECK(network_from_json(to_json(spec)) == spec);

  const auto parsed = network_from_json(R"({"mode":"def51","input":[1,4,4],"layers":[
      {"kind":"conv","kernel":2,"stride":2,"pad":0,"out":3},{"kind":"relu"},
      {"kind":"channel_mean"}]})");
  CHECK(parsed.mode == Mode::def51);
  CHECK(parsed.output_dims() == Dims{1, 2, 2});

  const auto pool = network_from_json(R"({"input":[1,4,4],"layers":[{"kind":"l2_pool","kernel":2}]})");
  CHECK(pool.layers[0].stride == 2);

  CHECK_THROWS_AS(network_from_json("{"), ParameterError);
  CHECK_THROWS_AS(network_from_json(R"({"input":[1,4,4],"layers":[{"kind":"dense"}]})"), ParameterError);
  CHECK_THROWS_AS(network_from_json(R"({"input":[1,4,4],"layers":[{"kind":"relu","kernel":3}]})"), ParameterError);
  CHECK_THROWS(network_from_json(R"({"input":[1,4],"layers":[]})"));
}
