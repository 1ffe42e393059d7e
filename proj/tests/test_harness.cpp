#include <doctest.h>

#include <cmath>
#include <sstream>

#include "rcd/error.hpp"
#include "rcd/harness.hpp"
#include "rcd/image_io.hpp"
#include "rcd/metrics.hpp"

using namespace rcd;

TEST_CASE("aggregate: per-net mean, then mean and sample std over nets") {
  std::vector<SweepRow> rows;
  // param 4: net 0 images {0.1, 0.3}, net 1 {0.5, 0.7}, net 2 {0.2, 0.2}
  const double s[3][2] = {{0.1, 0.3}, {0.5, 0.7}, {0.2, 0.2}};
  for (int n = 0; n < 3; ++n)
    for (int i = 0; i < 2; ++i) rows.push_back({4, n, "img" + std::to_string(i), s[n][i], 2 * s[n][i]});
  rows.push_back({16, 0, "img0", 0.9, 0.8});
  const auto aggs = aggregate(rows);
  REQUIRE(aggs.size() == 2);
  CHECK(aggs[0].param == 4);
  const double m0 = 0.2, m1 = 0.6, m2 = 0.2, mean = (m0 + m1 + m2) / 3;
  const double sd = std::sqrt(((m0 - mean) * (m0 - mean) + (m1 - mean) * (m1 - mean) + (m2 - mean) * (m2 - mean)) / 2);
  CHECK(aggs[0].ssim_mean == doctest::Approx(mean));
  CHECK(aggs[0].ssim_std == doctest::Approx(sd));
  CHECK(aggs[0].corr_mean == doctest::Approx(2 * mean));
  CHECK(aggs[0].corr_std == doctest::Approx(2 * sd));
  CHECK(aggs[1].ssim_mean == 0.9);
  CHECK(aggs[1].ssim_std == 0.0);

  std::ostringstream raw, agg;
  write_sweep_rows_csv(raw, rows);
  write_sweep_aggregate_csv(agg, aggs);
  CHECK(raw.str().rfind("param,net,image,ssim,pearson\n4,0,img0,", 0) == 0);
  CHECK(agg.str().rfind("param,ssim_mean,ssim_std,corr_mean,corr_std\n4,", 0) == 0);
}

TEST_CASE("normalisation modes") {
  CHECK(parse_normalize("auto") == Normalize::automatic);
  CHECK(parse_normalize("minmax") == Normalize::minmax);
  CHECK(parse_normalize("clamp") == Normalize::clamp);
  CHECK_THROWS_AS(parse_normalize("zscore"), ParameterError);

  const FeatureMaps out(1, 1, 3, std::vector<double>{-1, 0.5, 3});
  NetworkSpec crop_only;
  crop_only.input = {1, 1, 3};
  crop_only.layers = {LayerSpec::crop(1, 3)};
  NetworkSpec with_conv = crop_only;
  with_conv.layers.insert(with_conv.layers.begin(), LayerSpec::conv(1, 1, 0, 1));
  CHECK(normalize_output(out, crop_only, Normalize::automatic).data() == std::vector<double>{0, 0.5, 1});
  CHECK(normalize_output(out, with_conv, Normalize::automatic).data() == std::vector<double>{0, 0.375, 1});
  CHECK(normalize_output(out, with_conv, Normalize::clamp).data() == std::vector<double>{0, 0.5, 1});
}

TEST_CASE("scoring") {
  const auto img = synthetic_image(16, 1.0, 1);
  const auto s = score_reconstruction(img, img);
  CHECK(s.ssim == doctest::Approx(1.0));
  CHECK(s.pearson == doctest::Approx(1.0));
  const auto flat = score_reconstruction(img, FeatureMaps(1, 16, 16, 0.5));
  CHECK(flat.pearson == 0.0);
  CHECK(score_reconstruction(img, synthetic_image(16, 1.0, 2)).pearson ==
        doctest::Approx(pearson(to_gray(img), to_gray(synthetic_image(16, 1.0, 2)))));
}

TEST_CASE("sweeps are deterministic and thread independent") {
  std::vector<NamedImage> images;
  for (int i = 0; i < 3; ++i) images.push_back({"s" + std::to_string(i), synthetic_image(12, 1.0, static_cast<std::uint64_t>(i))});
  SweepConfig c;
  c.values = {2, 8};
  c.nets = 3;
  c.dist = DistributionSpec::gaussian(0.1);
  c.seed = 5;
  c.threads = 1;
  const auto a = run_sweep(c, images);
  c.threads = 3;
  const auto b = run_sweep(c, images);
  REQUIRE(a.rows.size() == 2 * 3 * 3);
  CHECK(a.aggregates.size() == 2);
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    CHECK(a.rows[i].param == b.rows[i].param);
    CHECK(a.rows[i].ssim == b.rows[i].ssim);
    CHECK(a.rows[i].pearson == b.rows[i].pearson);
  }
  const auto recomputed = aggregate(a.rows);
  CHECK(recomputed[1].ssim_std == a.aggregates[1].ssim_std);

  CHECK(c.options_for(8).channel_override == 8);
  SweepConfig k;
  k.axis = SweepAxis::kernel;
  CHECK(k.options_for(7).kernel == 7);
  c.values = {};
  CHECK_THROWS_AS(run_sweep(c, images), ParameterError);
}
