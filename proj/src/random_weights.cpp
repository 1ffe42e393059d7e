#include "rcd/random_weights.hpp"

#include <algorithm>
#include <cstdio>
#include <cmath>
#include <fstream>
#include <numbers>

#include "rcd/binary_io.hpp"
#include "rcd/error.hpp"

namespace rcd {
namespace {

constexpr char kBankMagic[9] = "RCDFBANK";
constexpr std::uint32_t kBankVersion = 1;

}  // namespace

std::string_view family_name(Family f) {
  switch (f) {
    case Family::gaussian: return "gaussian";
    case Family::uniform: return "uniform";
    case Family::logistic: return "logistic";
    case Family::laplace: return "laplace";
  }
  return "unknown";
}

void DistributionSpec::validate() const {
  if (!(std::isfinite(scale) && scale > 0.0)) {
    throw ParameterError("distribution scale must be finite and > 0, got " +
                         std::to_string(scale));
  }
  if (static_cast<std::uint32_t>(family) > 3) {
    throw ParameterError("unknown distribution family");
  }
}

DistributionSpec DistributionSpec::parse(std::string_view text) {
  const auto colon = text.find(':');
  const std::string_view name = text.substr(0, colon);
  DistributionSpec spec;
  if (name == "gaussian" || name == "normal") {
    spec = gaussian(0.015);
  } else if (name == "uniform") {
    spec = uniform(0.04);
  } else if (name == "logistic") {
    spec = logistic(0.015);
  } else if (name == "laplace") {
    spec = laplace(0.015);
  } else {
    throw ParameterError("unknown distribution '" + std::string(name) + "'");
  }
  if (colon != std::string_view::npos) {
    const std::string value(text.substr(colon + 1));
    std::size_t used = 0;
    try {
      spec.scale = std::stod(value, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != value.size() || value.empty()) {
      throw ParameterError("bad distribution scale '" + value + "'");
    }
  }
  spec.validate();
  return spec;
}

std::string DistributionSpec::to_string() const {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s:%.17g", std::string(family_name(family)).c_str(), scale);
  return buf;
}

Moments moments(const DistributionSpec& spec) {
  spec.validate();
  const double s = spec.scale;
  const double s2 = s * s;
  Moments m;
  switch (spec.family) {
    case Family::gaussian:
      // E|w| = s sqrt(2/pi), E w^2 = s^2, E w^4 = 3 s^4.
      m.k1 = s / std::sqrt(2.0 * std::numbers::pi);
      m.k2 = s2 / 2.0;
      m.k4 = 1.5 * s2 * s2;
      break;
    case Family::uniform:
      // On [-a, a): E|w| = a/2, E w^2 = a^2/3, E w^4 = a^4/5.
      m.k1 = s / 4.0;
      m.k2 = s2 / 6.0;
      m.k4 = s2 * s2 / 10.0;
      break;
    case Family::logistic: {
      // E|w| = 2 s ln 2, E w^2 = pi^2 s^2 / 3, E w^4 = 7 pi^4 s^4 / 15.
      const double pi2 = std::numbers::pi * std::numbers::pi;
      m.k1 = s * std::numbers::ln2;
      m.k2 = pi2 * s2 / 6.0;
      m.k4 = 7.0 * pi2 * pi2 * s2 * s2 / 30.0;
      break;
    }
    case Family::laplace:
      // E|w| = b, E w^2 = 2 b^2, E w^4 = 24 b^4.
      m.k1 = s / 2.0;
      m.k2 = s2;
      m.k4 = 12.0 * s2 * s2;
      break;
  }
  m.K1 = (m.k2 - m.k1 * m.k1) / (m.k1 * m.k1);
  m.K2 = (m.k4 - m.k2 * m.k2) / (m.k2 * m.k2);
  return m;
}

double angular_kernel(double theta) {
  if (std::isnan(theta)) throw ParameterError("angular_kernel: NaN angle");
  const double t = std::clamp(theta, 0.0, std::numbers::pi);
  return ((std::numbers::pi - t) * std::cos(t) + std::sin(t)) / std::numbers::pi;
}

double angular_kernel_from_cos(double cos_theta) {
  if (std::isnan(cos_theta)) throw ParameterError("angular_kernel: NaN cosine");
  const double c = std::clamp(cos_theta, -1.0, 1.0);
  const double t = std::acos(c);
  return ((std::numbers::pi - t) * c + std::sqrt(std::max(0.0, 1.0 - c * c))) /
         std::numbers::pi;
}

std::vector<FilterShape> FilterBank::shapes() const {
  std::vector<FilterShape> out;
  out.reserve(layers.size());
  for (const auto& l : layers) out.push_back({l.count, l.length});
  return out;
}

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  return mix64(mix64(mix64(seed) ^ a) ^ (b * 0xd6e8feb86659fd93ULL));
}

double draw(const DistributionSpec& spec, std::mt19937_64& rng) {
  switch (spec.family) {
    case Family::gaussian:
      return std::normal_distribution<double>(0.0, spec.scale)(rng);
    case Family::uniform: {
      double v;
      do {
        v = std::uniform_real_distribution<double>(-spec.scale, spec.scale)(rng);
      } while (v >= spec.scale);
      return v;
    }
    case Family::logistic: {
      double u;
      do {
        u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
      } while (u <= 0.0 || u >= 1.0);
      return spec.scale * std::log(u / (1.0 - u));
    }
    case Family::laplace: {
      double u;
      do {
        u = std::uniform_real_distribution<double>(-0.5, 0.5)(rng);
      } while (u <= -0.5 || u >= 0.5);
      const double mag = -spec.scale * std::log1p(-2.0 * std::abs(u));
      return u < 0.0 ? -mag : mag;
    }
  }
  return 0.0;
}

void fill_filter(const DistributionSpec& spec, std::uint64_t seed, int layer,
                 int filter, std::span<double> out) {
  std::mt19937_64 rng(substream_seed(seed, static_cast<std::uint64_t>(layer),
                                     static_cast<std::uint64_t>(filter)));
  if (spec.family == Family::gaussian) {
    std::normal_distribution<double> dist(0.0, spec.scale);
    for (double& v : out) v = dist(rng);
    return;
  }
  for (double& v : out) v = draw(spec, rng);
}

FilterBank sample_filterbank(const DistributionSpec& spec,
                             const std::vector<FilterShape>& shapes,
                             std::uint64_t seed) {
  spec.validate();
  FilterBank bank;
  bank.spec = spec;
  bank.seed = seed;
  bank.layers.reserve(shapes.size());
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    const auto& s = shapes[i];
    if (s.count <= 0 || s.length <= 0) {
      throw ShapeError("filter shape must be positive in layer " + std::to_string(i));
    }
    FilterLayer layer;
    layer.count = s.count;
    layer.length = s.length;
    layer.values.resize(static_cast<std::size_t>(s.count) * s.length);
    for (int j = 0; j < s.count; ++j) {
      fill_filter(spec, seed, static_cast<int>(i), j,
                  {layer.values.data() + static_cast<std::size_t>(j) * s.length,
                   static_cast<std::size_t>(s.length)});
    }
    bank.layers.push_back(std::move(layer));
  }
  return bank;
}

void write_filterbank(std::ostream& out, const FilterBank& bank) {
  using namespace detail;
  put_magic(out, kBankMagic);
  put_u32(out, kBankVersion);
  put_u32(out, static_cast<std::uint32_t>(bank.spec.family));
  put_f64(out, bank.spec.scale);
  put_u64(out, bank.seed);
  put_u32(out, static_cast<std::uint32_t>(bank.layers.size()));
  for (const auto& l : bank.layers) {
    put_u32(out, static_cast<std::uint32_t>(l.count));
    put_u32(out, static_cast<std::uint32_t>(l.length));
  }
  for (const auto& l : bank.layers) {
    for (double v : l.values) put_f64(out, v);
  }
  if (!out) throw IoError("failed writing filter bank");
}

FilterBank read_filterbank(std::istream& in) {
  using namespace detail;
  expect_magic(in, kBankMagic, "filter bank");
  const auto version = get_u32(in);
  if (version != kBankVersion) {
    throw IoError("unsupported filter bank version " + std::to_string(version));
  }
  FilterBank bank;
  const auto family = get_u32(in);
  if (family > 3) throw IoError("filter bank has unknown distribution family");
  bank.spec.family = static_cast<Family>(family);
  bank.spec.scale = get_f64(in);
  bank.seed = get_u64(in);
  const auto n = get_u32(in);
  bank.layers.resize(n);
  for (auto& l : bank.layers) {
    l.count = static_cast<int>(get_u32(in));
    l.length = static_cast<int>(get_u32(in));
    if (l.count <= 0 || l.length <= 0) throw IoError("filter bank has empty layer");
  }
  for (auto& l : bank.layers) {
    l.values.resize(static_cast<std::size_t>(l.count) * l.length);
    for (double& v : l.values) v = get_f64(in);
  }
  return bank;
}

void save_filterbank(const std::filesystem::path& path, const FilterBank& bank) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  write_filterbank(out, bank);
}

FilterBank load_filterbank(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return read_filterbank(in);
}

}  // namespace rcd
