#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "rcd/tensor.hpp"

namespace rcd {

enum class Family : std::uint32_t { gaussian = 0, uniform = 1, logistic = 2, laplace = 3 };

/// A zero-mean symmetric weight distribution. `scale` is the stdev for
/// gaussian, the half-width a of [-a, a) for uniform, and the standard scale
/// parameter for logistic and laplace (laplace variance is 2*scale^2).
struct DistributionSpec {
  Family family = Family::gaussian;
  double scale = 0.015;

  static DistributionSpec gaussian(double sigma) { return {Family::gaussian, sigma}; }
  static DistributionSpec uniform(double half_width) { return {Family::uniform, half_width}; }
  static DistributionSpec logistic(double s) { return {Family::logistic, s}; }
  static DistributionSpec laplace(double lambda) { return {Family::laplace, lambda}; }

  /// Throws ParameterError unless scale is finite and strictly positive.
  void validate() const;
  bool isotropic() const { return family == Family::gaussian; }

  /// Parses "family[:scale]", e.g. "gaussian:0.015" or "laplace".
  static DistributionSpec parse(std::string_view text);
  std::string to_string() const;

  friend bool operator==(const DistributionSpec&, const DistributionSpec&) = default;
};

std::string_view family_name(Family f);

/// k_m = E|w|^m / 2 and the relative variances K_m = (k_{2m} - k_m^2) / k_m^2.
struct Moments {
  double k1 = 0.0;
  double k2 = 0.0;
  double k4 = 0.0;
  double K1 = 0.0;
  double K2 = 0.0;
};

/// Closed-form moments of a single filter entry.
Moments moments(const DistributionSpec& spec);

/// Normalized arc-cosine kernel h(theta) = ((pi - theta) cos theta + sin theta) / pi.
/// Arguments outside [0, pi] are clamped; NaN raises ParameterError.
double angular_kernel(double theta);

/// h evaluated at acos(c) with c clamped to [-1, 1].
double angular_kernel_from_cos(double cos_theta);

/// Shape of one convolutional layer's filter block.
struct FilterShape {
  int count = 0;
  int length = 0;
  friend bool operator==(const FilterShape&, const FilterShape&) = default;
};

/// Random filters for every convolutional layer of a network, plus the
/// distribution and seed that produced them.
struct FilterBank {
  DistributionSpec spec;
  std::uint64_t seed = 0;
  std::vector<FilterLayer> layers;

  std::vector<FilterShape> shapes() const;
  friend bool operator==(const FilterBank&, const FilterBank&) = default;
};

/// splitmix64 finalizer; used to derive independent substream seeds.
std::uint64_t mix64(std::uint64_t x);

/// Seed of the substream for (seed, a, b); distinct triples give
/// statistically independent streams.
std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b);

/// Draws one value from `spec` using `rng`.
double draw(const DistributionSpec& spec, std::mt19937_64& rng);

/// Fills `out` with i.i.d. draws from the substream (seed, layer, filter).
void fill_filter(const DistributionSpec& spec, std::uint64_t seed, int layer,
                 int filter, std::span<double> out);

/// Samples every layer. Filter j of layer i comes from its own substream, so
/// adding layers or filters never perturbs existing ones.
FilterBank sample_filterbank(const DistributionSpec& spec,
                             const std::vector<FilterShape>& shapes,
                             std::uint64_t seed);

/// Versioned binary format: magic, version, distribution, seed, per-layer
/// shapes, then raw little-endian IEEE-754 doubles.
void write_filterbank(std::ostream& out, const FilterBank& bank);
FilterBank read_filterbank(std::istream& in);
void save_filterbank(const std::filesystem::path& path, const FilterBank& bank);
FilterBank load_filterbank(const std::filesystem::path& path);

}  // namespace rcd
