#include "rcd/harness.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>

#include "rcd/csv.hpp"
#include "rcd/error.hpp"
#include "rcd/image_io.hpp"
#include "rcd/metrics.hpp"
#include "rcd/parallel.hpp"

namespace rcd {

Normalize parse_normalize(std::string_view s) {
  if (s == "auto") return Normalize::automatic;
  if (s == "minmax") return Normalize::minmax;
  if (s == "clamp") return Normalize::clamp;
  throw ParameterError("unknown normalisation '" + std::string(s) + "' (auto, minmax, clamp)");
}

FeatureMaps normalize_output(const FeatureMaps& out, const NetworkSpec& spec, Normalize mode) {
  if (mode == Normalize::automatic) mode = spec.conv_count() > 0 ? Normalize::minmax : Normalize::clamp;
  if (mode == Normalize::minmax) return normalize_minmax(out);
  FeatureMaps c = out;
  for (auto& v : c.data()) v = std::clamp(v, 0.0, 1.0);
  return c;
}

Score score_reconstruction(const FeatureMaps& image, const FeatureMaps& reconstruction) {
  const GrayImage a = to_gray(image);
  const GrayImage b = to_gray(reconstruction);
  Score s;
  s.ssim = ssim_reported(a, b);
  try {
    s.pearson = pearson(a, b);
  } catch (const DegenerateInputError&) {
    s.pearson = 0.0;
  }
  return s;
}

std::vector<NamedImage> load_image_dir(const std::string& dir) {
  std::vector<NamedImage> images;
  for (const auto& p : list_images(dir)) images.push_back({p.filename().string(), load_image(p)});
  if (images.empty()) throw IoError("no .png or .pgm images in " + dir);
  return images;
}

PresetOptions SweepConfig::options_for(int value) const {
  PresetOptions o = options;
  if (axis == SweepAxis::channels) {
    o.channel_override = value;
  } else {
    o.kernel = value;
  }
  return o;
}

SweepResult run_sweep(const SweepConfig& config, const std::vector<NamedImage>& images) {
  if (images.empty()) throw IoError("sweep needs at least one image");
  if (config.values.empty()) throw ParameterError("sweep needs at least one value");
  if (config.nets < 1) throw ParameterError("sweep needs at least one network");
  config.dist.validate();

  SweepResult result;
  for (int value : config.values) {
    const PresetOptions opts = config.options_for(value);
    // One spec per image size; filter shapes do not depend on the size.
    std::map<std::pair<int, int>, NetworkSpec> specs;
    for (const auto& img : images) {
      const auto key = std::make_pair(img.maps.height(), img.maps.width());
      if (!specs.count(key)) {
        specs[key] = build_preset(config.preset, {img.maps.channels(), key.first, key.second}, opts);
      }
    }
    const auto shapes = specs.begin()->second.filter_shapes();
    std::vector<std::vector<SweepRow>> per_net(static_cast<std::size_t>(config.nets));
    parallel_for(per_net.size(), config.threads, [&](std::size_t n) {
      const auto bank = sample_filterbank(config.dist, shapes, config.seed + n);
      for (const auto& img : images) {
        const auto& spec = specs.at({img.maps.height(), img.maps.width()});
        if (spec.input.channels != img.maps.channels()) {
          throw ShapeError("image " + img.id + " has a different channel count from the first image");
        }
        const auto out = normalize_output(forward(spec, bank, img.maps).output, spec, config.normalize);
        const Score s = score_reconstruction(img.maps, out);
        per_net[n].push_back({value, static_cast<int>(n), img.id, s.ssim, s.pearson});
      }
    });
    for (auto& rows : per_net) {
      for (auto& r : rows) result.rows.push_back(std::move(r));
    }
  }
  result.aggregates = aggregate(result.rows);
  return result;
}

std::vector<SweepAggregate> aggregate(const std::vector<SweepRow>& rows) {
  struct Acc {
    double ssim = 0.0, corr = 0.0;
    int count = 0;
  };
  std::vector<int> params;
  std::map<int, std::map<int, Acc>> nets;
  for (const auto& r : rows) {
    if (!nets.count(r.param)) params.push_back(r.param);
    auto& a = nets[r.param][r.net];
    a.ssim += r.ssim;
    a.corr += r.pearson;
    ++a.count;
  }
  std::vector<SweepAggregate> out;
  for (int p : params) {
    std::vector<double> ssim, corr;
    for (const auto& [net, a] : nets[p]) {
      ssim.push_back(a.ssim / a.count);
      corr.push_back(a.corr / a.count);
    }
    auto mean_std = [](const std::vector<double>& v) {
      double m = 0.0;
      for (double x : v) m += x;
      m /= static_cast<double>(v.size());
      double ss = 0.0;
      for (double x : v) ss += (x - m) * (x - m);
      const double sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
      return std::make_pair(m, sd);
    };
    const auto [sm, ssd] = mean_std(ssim);
    const auto [cm, csd] = mean_std(corr);
    out.push_back({p, sm, ssd, cm, csd});
  }
  return out;
}

void write_sweep_rows_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  CsvWriter csv(out);
  csv.header({"param", "net", "image", "ssim", "pearson"});
  for (const auto& r : rows) {
    csv.field(r.param).field(r.net).field(r.image).field(r.ssim).field(r.pearson);
    csv.end_row();
  }
}

void write_sweep_aggregate_csv(std::ostream& out, const std::vector<SweepAggregate>& aggs) {
  CsvWriter csv(out);
  csv.header({"param", "ssim_mean", "ssim_std", "corr_mean", "corr_std"});
  for (const auto& a : aggs) {
    csv.field(a.param).field(a.ssim_mean).field(a.ssim_std).field(a.corr_mean).field(a.corr_std);
    csv.end_row();
  }
}

}  // namespace rcd
