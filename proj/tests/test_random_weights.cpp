#include <doctest.h>

#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include "rcd/error.hpp"
#include "rcd/random_weights.hpp"

using namespace rcd;

namespace {

// Half the m-th absolute moment by trapezoid integration of a density.
double half_abs_moment(const std::function<double(double)>& pdf, double lim, int m) {
  const int steps = 400000;
  const double h = 2 * lim / steps;
  double s = 0.0;
  for (int i = 0; i <= steps; ++i) {
    const double w = -lim + i * h;
    const double f = std::pow(std::abs(w), m) * pdf(w);
    s += (i == 0 || i == steps) ? f / 2 : f;
  }
  return 0.5 * s * h;
}

std::function<double(double)> density(const DistributionSpec& d) {
  const double s = d.scale;
  switch (d.family) {
    case Family::gaussian:
      return [s](double w) { return std::exp(-w * w / (2 * s * s)) / (s * std::sqrt(2 * std::numbers::pi)); };
    case Family::uniform:
      return [s](double w) { return std::abs(w) <= s ? 1 / (2 * s) : 0.0; };
    case Family::logistic:
      return [s](double w) {
        const double e = std::exp(-std::abs(w) / s);
        return e / (s * (1 + e) * (1 + e));
      };
    case Family::laplace:
      return [s](double w) { return std::exp(-std::abs(w) / s) / (2 * s); };
  }
  return {};
}

}  // namespace

TEST_CASE("closed-form moments agree with numeric integration") {
  for (const auto& d : {DistributionSpec::gaussian(0.7), DistributionSpec::uniform(1.3),
                        DistributionSpec::logistic(0.4), DistributionSpec::laplace(0.9)}) {
    CAPTURE(d.to_string());
    const auto m = moments(d);
    const auto pdf = density(d);
    const double lim = d.family == Family::uniform ? d.scale : 60 * d.scale;
    CHECK(m.k1 == doctest::Approx(half_abs_moment(pdf, lim, 1)).epsilon(1e-6));
    CHECK(m.k2 == doctest::Approx(half_abs_moment(pdf, lim, 2)).epsilon(1e-6));
    CHECK(m.k4 == doctest::Approx(half_abs_moment(pdf, lim, 4)).epsilon(1e-6));
    CHECK(m.K1 == doctest::Approx((m.k2 - m.k1 * m.k1) / (m.k1 * m.k1)));
    CHECK(m.K2 == doctest::Approx((m.k4 - m.k2 * m.k2) / (m.k2 * m.k2)));
  }
}

TEST_CASE("relative variances are scale free") {
  CHECK(moments(DistributionSpec::gaussian(0.015)).K1 == doctest::Approx(std::numbers::pi - 1));
  CHECK(moments(DistributionSpec::gaussian(3.0)).K2 == doctest::Approx(5.0));
  CHECK(moments(DistributionSpec::uniform(0.04)).K1 == doctest::Approx(5.0 / 3.0));
}

TEST_CASE("angular kernel") {
  CHECK(angular_kernel(0.0) == doctest::Approx(1.0));
  CHECK(angular_kernel(std::numbers::pi / 2) == doctest::Approx(1 / std::numbers::pi));
  CHECK(angular_kernel(std::numbers::pi) == doctest::Approx(0.0));
  CHECK(angular_kernel(-1.0) == angular_kernel(0.0));
  CHECK_THROWS_AS(angular_kernel(NAN), ParameterError);
  for (double t : {0.1, 0.9, 2.0, 3.0}) {
    CHECK(angular_kernel_from_cos(std::cos(t)) == doctest::Approx(angular_kernel(t)));
  }
  CHECK(angular_kernel_from_cos(1.5) == doctest::Approx(1.0));
}

TEST_CASE("distribution parsing and validation") {
  CHECK(DistributionSpec::parse("gaussian:0.5") == DistributionSpec::gaussian(0.5));
  CHECK(DistributionSpec::parse("gaussian").scale == 0.015);
  CHECK(DistributionSpec::parse("uniform").scale == 0.04);
  CHECK(DistributionSpec::parse("laplace:2") == DistributionSpec::laplace(2));
  CHECK_THROWS_AS(DistributionSpec::parse("cauchy"), ParameterError);
  CHECK_THROWS_AS(DistributionSpec::parse("gaussian:-1"), ParameterError);
  CHECK_THROWS_AS(DistributionSpec::parse("gaussian:abc"), ParameterError);
  CHECK(DistributionSpec::parse(DistributionSpec::logistic(0.25).to_string()) == DistributionSpec::logistic(0.25));
  CHECK(DistributionSpec::gaussian(1).isotropic());
  CHECK_FALSE(DistributionSpec::uniform(1).isotropic());
}

TEST_CASE("sampled moments match the family") {
  for (const auto& d : {DistributionSpec::gaussian(0.5), DistributionSpec::uniform(2.0),
                        DistributionSpec::logistic(0.3), DistributionSpec::laplace(0.7)}) {
    CAPTURE(d.to_string());
    std::vector<double> v(200000);
    fill_filter(d, 99, 0, 0, v);
    double s1 = 0, s2 = 0, s4 = 0;
    for (double w : v) {
      s1 += std::abs(w);
      s2 += w * w;
      s4 += w * w * w * w;
    }
    const double n = static_cast<double>(v.size());
    const auto m = moments(d);
    CHECK(s1 / n / 2 == doctest::Approx(m.k1).epsilon(0.02));
    CHECK(s2 / n / 2 == doctest::Approx(m.k2).epsilon(0.02));
    CHECK(s4 / n / 2 == doctest::Approx(m.k4).epsilon(0.1));
  }
}

TEST_CASE("substreams are deterministic and distinct") {
  CHECK(substream_seed(1, 2, 3) == substream_seed(1, 2, 3));
  std::set<std::uint64_t> seen;
  for (std::uint64_t s = 0; s < 4; ++s)
    for (std::uint64_t a = 0; a < 16; ++a)
      for (std::uint64_t b = 0; b < 16; ++b) seen.insert(substream_seed(s, a, b));
  CHECK(seen.size() == 4 * 16 * 16);

  const std::vector<FilterShape> shapes{{4, 9}, {2, 36}};
  const auto a = sample_filterbank(DistributionSpec::gaussian(1), shapes, 5);
  const auto b = sample_filterbank(DistributionSpec::gaussian(1), shapes, 5);
  const auto c = sample_filterbank(DistributionSpec::gaussian(1), shapes, 6);
  CHECK(a == b);
  CHECK(a.layers[0].values != c.layers[0].values);
  CHECK(a.shapes() == shapes);

  // a filter does not depend on how many filters the layer has
  const auto wide = sample_filterbank(DistributionSpec::gaussian(1), {{8, 9}}, 5);
  CHECK(std::equal(a.layers[0].values.begin(), a.layers[0].values.end(), wide.layers[0].values.begin()));
}

TEST_CASE("filter bank binary round trip") {
  const auto bank = sample_filterbank(DistributionSpec::laplace(0.3), {{3, 4}, {5, 27}}, 77);
  std::stringstream ss;
  write_filterbank(ss, bank);
  CHECK(read_filterbank(ss) == bank);

  std::stringstream bad("NOTABANK");
  CHECK_THROWS_AS(read_filterbank(bad), IoError);
  std::stringstream full;
  write_filterbank(full, bank);
  std::stringstream truncated(full.str().substr(0, full.str().size() - 3));
  CHECK_THROWS_AS(read_filterbank(truncated), IoError);
}
