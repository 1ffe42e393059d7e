#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "rcd/network.hpp"
#include "rcd/random_weights.hpp"
#include "rcd/tensor.hpp"

namespace rcd {

/// How a reconstruction is mapped onto [0, 1] before scoring or saving.
/// `automatic` min-max normalises when the network has a conv layer and
/// clamps otherwise, so value-preserving networks keep their scale.
enum class Normalize { automatic, minmax, clamp };

Normalize parse_normalize(std::string_view s);
FeatureMaps normalize_output(const FeatureMaps& out, const NetworkSpec& spec, Normalize mode);

struct Score {
  double ssim = 0.0;
  double pearson = 0.0;
};

/// Grayscale SSIM (inversion rule) and Pearson between an image and its
/// reconstruction. A constant reconstruction scores pearson 0.
Score score_reconstruction(const FeatureMaps& image, const FeatureMaps& reconstruction);

struct NamedImage {
  std::string id;
  FeatureMaps maps;
};

std::vector<NamedImage> load_image_dir(const std::string& dir);

enum class SweepAxis { channels, kernel };

struct SweepConfig {
  std::string preset = "rrvgg_conv1_deconv1";
  SweepAxis axis = SweepAxis::channels;
  std::vector<int> values;
  int nets = 10;
  DistributionSpec dist;
  PresetOptions options;
  Normalize normalize = Normalize::minmax;
  std::uint64_t seed = 0;
  unsigned threads = 0;

  /// Preset options for one sweep value.
  PresetOptions options_for(int value) const;
};

struct SweepRow {
  int param = 0;
  int net = 0;
  std::string image;
  double ssim = 0.0;
  double pearson = 0.0;
};

struct SweepAggregate {
  int param = 0;
  double ssim_mean = 0.0;
  double ssim_std = 0.0;
  double corr_mean = 0.0;
  double corr_std = 0.0;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::vector<SweepAggregate> aggregates;
};

/// Network i of every sweep value samples its filters from seed + i.
SweepResult run_sweep(const SweepConfig& config, const std::vector<NamedImage>& images);

/// Per-network mean over images, then mean and (n-1) standard deviation
/// over networks, for each sweep value in first-seen order.
std::vector<SweepAggregate> aggregate(const std::vector<SweepRow>& rows);

void write_sweep_rows_csv(std::ostream& out, const std::vector<SweepRow>& rows);
void write_sweep_aggregate_csv(std::ostream& out, const std::vector<SweepAggregate>& aggs);

}  // namespace rcd
