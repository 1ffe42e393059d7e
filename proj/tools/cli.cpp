#include "rcd/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <optional>
#include <ostream>

#include "rcd/csv.hpp"
#include "rcd/error.hpp"
#include "rcd/harness.hpp"
#include "rcd/image_io.hpp"
#include "rcd/metrics.hpp"
#include "rcd/network.hpp"
#include "rcd/theory.hpp"
#include "rcd/trainer.hpp"

namespace rcd {
namespace {

namespace fs = std::filesystem;

struct Globals {
  std::uint64_t seed = 0;
  std::string out = ".";
  unsigned threads = 0;
};

fs::path out_path(const Globals& g, const std::string& name) {
  fs::create_directories(g.out);
  return fs::path(g.out) / name;
}

template <typename Fn>
void write_file(const fs::path& path, Fn&& fn) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path.string());
  fn(f);
  if (!f) throw IoError("failed writing " + path.string());
}

std::string fmt(double v) { return format_double(v); }

double degrees(double cos_value) {
  return std::acos(std::clamp(cos_value, -1.0, 1.0)) * 180.0 / std::numbers::pi;
}

// ---- reconstruct / sweeps ------------------------------------------------------

struct NetChoice {
  std::string net_path;
  std::string preset;
  std::optional<int> channels;
  int kernel = 3;
  bool variant = false;
  std::string activation;

  PresetOptions options() const {
    PresetOptions o;
    o.channel_override = channels;
    o.kernel = kernel;
    o.variant = variant;
    if (activation == "relu") o.activation = Activation::relu;
    if (activation == "leaky") o.activation = Activation::leaky;
    return o;
  }

  NetworkSpec build(Dims input) const {
    if (!net_path.empty()) return load_network(net_path);
    return build_preset(preset, input, options());
  }
};

void add_net_options(CLI::App* cmd, NetChoice& n, const std::string& default_preset) {
  n.preset = default_preset;
  cmd->add_option("--net", n.net_path, "NetworkSpec JSON file (overrides --preset)");
  cmd->add_option("--preset", n.preset, "built-in network")->capture_default_str();
  cmd->add_option("--channels", n.channels, "channel count of every encoder conv");
  cmd->add_option("--kernel", n.kernel, "conv kernel size (rrvgg_conv1_1)")->capture_default_str();
  cmd->add_flag("--variant", n.variant, "replace the last decoder conv by a channel mean");
  cmd->add_option("--activation", n.activation, "relu or leaky (default depends on preset)")
      ->check(CLI::IsMember({"relu", "leaky"}));
}

struct ImageSource {
  std::string dir;
  int count = 20;
  int size = 32;
  double smoothness = 1.5;
};

void add_image_source(CLI::App* cmd, ImageSource& s) {
  cmd->add_option("--images", s.dir, "directory of .png/.pgm images (sorted by name)");
  cmd->add_option("--count", s.count, "synthetic images when --images is absent")->capture_default_str();
  cmd->add_option("--size", s.size, "synthetic image size")->capture_default_str();
  cmd->add_option("--smoothness", s.smoothness, "synthetic blur sigma")->capture_default_str();
}

std::vector<NamedImage> resolve_images(const ImageSource& s, std::uint64_t seed) {
  if (!s.dir.empty()) return load_image_dir(s.dir);
  std::vector<NamedImage> images;
  for (int i = 0; i < s.count; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "synthetic_%04d", i);
    images.push_back({name, synthetic_image(s.size, s.smoothness,
                                            substream_seed(seed, static_cast<std::uint64_t>(i), 0x1a6e))});
  }
  return images;
}

int cmd_reconstruct(const Globals& g, const NetChoice& n, const std::string& image_path,
                    const std::string& dist, const std::string& normalize, const std::string& name,
                    std::ostream& out) {
  const auto image = load_image(image_path);
  const auto spec = n.build({image.channels(), image.height(), image.width()});
  spec.validate();
  const auto d = DistributionSpec::parse(dist);
  const auto raw = run_random(spec, d, g.seed, image);
  const auto rec = normalize_output(raw, spec, parse_normalize(normalize));
  save_image(out_path(g, name), rec);
  std::string pearson_text = "n/a";
  std::string ssim_text = "n/a";
  const GrayImage a = to_gray(image);
  const GrayImage b = to_gray(rec);
  try {
    pearson_text = fmt(pearson(a, b));
  } catch (const DegenerateInputError&) {
  }
  if (a.height() >= 11 && a.width() >= 11) ssim_text = fmt(ssim_reported(a, b));
  out << "pearson=" << pearson_text << " ssim=" << ssim_text << '\n';
  return kExitOk;
}

int cmd_sweep(const Globals& g, SweepAxis axis, const NetChoice& n, const std::vector<int>& values,
              int nets, const std::string& dist, const ImageSource& src, const std::string& prefix,
              std::ostream& out) {
  if (!n.net_path.empty()) throw ParameterError("sweeps use --preset, not --net");
  SweepConfig cfg;
  cfg.preset = n.preset;
  cfg.axis = axis;
  cfg.values = values;
  cfg.nets = nets;
  cfg.dist = DistributionSpec::parse(dist);
  cfg.options = n.options();
  cfg.options.channel_override.reset();
  if (axis == SweepAxis::kernel && n.channels) cfg.options.conv1_1_channels = *n.channels;
  cfg.seed = g.seed;
  cfg.threads = g.threads;
  const auto images = resolve_images(src, g.seed);
  const auto result = run_sweep(cfg, images);
  write_file(out_path(g, prefix + "_raw.csv"), [&](std::ostream& f) { write_sweep_rows_csv(f, result.rows); });
  write_file(out_path(g, prefix + "_aggregate.csv"),
             [&](std::ostream& f) { write_sweep_aggregate_csv(f, result.aggregates); });
  write_sweep_aggregate_csv(out, result.aggregates);
  return kExitOk;
}

// ---- verify ----------------------------------------------------------------------

struct VerifyInput {
  std::string net_path;
  std::string image;
  int size = 16;
  double smoothness = 1.0;
  std::string dist = "gaussian:1";
  int trials = 20;
};

void add_verify_input(CLI::App* cmd, VerifyInput& v, int default_size, int default_trials) {
  v.size = default_size;
  v.trials = default_trials;
  cmd->add_option("--net", v.net_path, "def51 NetworkSpec JSON (default: built-in test net)");
  cmd->add_option("--image", v.image, "input image (default: synthetic)");
  cmd->add_option("--size", v.size, "synthetic input size for the built-in net")->capture_default_str();
  cmd->add_option("--smoothness", v.smoothness, "synthetic blur sigma")->capture_default_str();
  cmd->add_option("--dist", v.dist, "isotropic filter distribution")->capture_default_str();
  cmd->add_option("--trials", v.trials, "Monte-Carlo trials")->capture_default_str();
}

FeatureMaps verify_image(const VerifyInput& v, Dims dims, std::uint64_t seed) {
  if (!v.image.empty()) {
    auto img = load_image(v.image);
    if (img.channels() != dims.channels || img.height() != dims.height || img.width() != dims.width) {
      throw ShapeError("image " + v.image + " does not match the network input");
    }
    return img;
  }
  if (dims.height != dims.width) throw ParameterError("synthetic inputs are square; pass --image");
  return synthetic_image(dims.height, v.smoothness, substream_seed(seed, 0x1a6e, 1), dims.channels);
}

NetworkSpec l2_test_net(int size) {
  NetworkSpec s;
  s.input = {1, size, size};
  s.mode = Mode::def51;
  s.layers = {LayerSpec::conv(2, 2, 0, 1), LayerSpec::relu(), LayerSpec::pool(LayerKind::l2_pool, 2, 2),
              LayerSpec::conv(2, 2, 0, 1), LayerSpec::relu(), LayerSpec::channel_mean()};
  return s;
}

NetworkSpec avg_test_net(int size) {
  NetworkSpec s;
  s.input = {1, size, size};
  s.mode = Mode::def51;
  s.layers = {LayerSpec::conv(2, 1, 0, 1), LayerSpec::relu(), LayerSpec::pool(LayerKind::avg_pool, 2, 1),
              LayerSpec::conv(1, 1, 0, 1), LayerSpec::relu(), LayerSpec::channel_mean()};
  return s;
}

int cmd_converge(const Globals& g, const VerifyInput& v, const std::vector<int>& channels, bool avg,
                 std::ostream& out) {
  const NetworkSpec base = !v.net_path.empty() ? load_network(v.net_path)
                                               : (avg ? avg_test_net(v.size) : l2_test_net(v.size));
  const auto dist = DistributionSpec::parse(v.dist);
  const auto x = verify_image(v, base.input, g.seed);
  const std::string prefix = avg ? "converge_avg" : "converge_l2";
  const auto probe = with_uniform_channels(base, 1);
  const ConvergenceField field =
      avg ? convergence_field_avg(probe, {dist}, x).field : convergence_field_l2(probe, {dist}, x);
  write_file(out_path(g, prefix + "_field.csv"), [&](std::ostream& f) { write_field_csv(f, field); });

  std::ofstream trials_file(out_path(g, prefix + "_trials.csv"), std::ios::binary);
  std::ofstream summary_file(out_path(g, prefix + "_summary.csv"), std::ios::binary);
  if (!trials_file || !summary_file) throw IoError("cannot write verification CSVs in " + g.out);
  CsvWriter trials_csv(trials_file);
  CsvWriter summary_csv(summary_file);
  trials_csv.header({"channels", "trial", "angle_deg"});
  summary_csv.header({"channels", "trials", "mean_angle_deg", "max_angle_deg", "mean_output_angle_deg"});
  for (int n : channels) {
    const auto outputs = mc_outputs(base, dist, x, n, v.trials, g.seed, g.threads);
    std::vector<double> mean(field.f_star.size(), 0.0);
    double total = 0.0, worst = 0.0;
    for (std::size_t t = 0; t < outputs.size(); ++t) {
      const double angle = degrees(cos_angle(outputs[t].data(), field.f_star));
      total += angle;
      worst = std::max(worst, angle);
      for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += outputs[t].data()[i] / v.trials;
      trials_csv.field(n).field(t).field(angle);
      trials_csv.end_row();
    }
    const double mean_angle = degrees(cos_angle(mean, field.f_star));
    summary_csv.field(n).field(v.trials).field(total / v.trials).field(worst).field(mean_angle);
    summary_csv.end_row();
    out << "channels=" << n << " mean_angle_deg=" << fmt(total / v.trials)
        << " mean_output_angle_deg=" << fmt(mean_angle) << '\n';
  }
  return kExitOk;
}

int cmd_variance(const Globals& g, const VerifyInput& v, int channels, double delta, int kernel,
                 std::ostream& out) {
  const NetworkSpec base = !v.net_path.empty() ? load_network(v.net_path)
                                               : two_layer_net({1, v.size, v.size}, kernel, channels);
  const auto dist = DistributionSpec::parse(v.dist);
  const auto x = verify_image(v, base.input, g.seed);
  const auto reports = mc_verify(base, dist, x, channels, v.trials, delta, g.seed, g.threads);
  write_file(out_path(g, "variance_trials.csv"), [&](std::ostream& f) { write_reports_csv(f, reports); });
  const auto violations = std::count_if(reports.begin(), reports.end(), [](const auto& r) { return !r.holds; });
  const double fraction = static_cast<double>(violations) / static_cast<double>(reports.size());
  const bool ok = fraction <= delta;
  write_file(out_path(g, "variance_summary.csv"), [&](std::ostream& f) {
    CsvWriter csv(f);
    csv.header({"kind", "layers", "channels", "delta", "trials", "bound", "violations", "fraction", "holds"});
    csv.field(reports.front().kind).field(reports.front().layers).field(channels).field(delta);
    csv.field(v.trials).field(reports.front().bound).field(static_cast<long long>(violations));
    csv.field(fraction).field(ok);
    csv.end_row();
  });
  out << "bound=" << fmt(reports.front().bound) << " violations=" << violations << '/' << reports.size()
      << " fraction=" << fmt(fraction) << (ok ? " ok" : " FAILED") << '\n';
  return ok ? kExitOk : kExitVerification;
}

int cmd_cosine(const Globals& g, const ImageSource& src, const std::string& image, const std::string& net_path,
               int kernel, double floor, std::ostream& out) {
  if (!(floor >= 0.0 && floor < 1.0)) throw ParameterError("--floor must lie in [0, 1)");
  std::vector<NamedImage> images;
  if (!image.empty()) {
    images.push_back({fs::path(image).filename().string(), load_image(image)});
  } else if (!src.dir.empty()) {
    images = load_image_dir(src.dir);
  } else {
    // Synthetic inputs cycle through blur radii 0..4.
    for (int i = 0; i < src.count; ++i) {
      char name[32];
      std::snprintf(name, sizeof name, "synthetic_%04d", i);
      images.push_back({name, synthetic_image(src.size, i % 5, substream_seed(g.seed, static_cast<std::uint64_t>(i), 0xc05))});
    }
  }
  std::optional<NetworkSpec> spec;
  if (!net_path.empty()) spec = load_network(net_path);
  int failures = 0;
  write_file(out_path(g, "cosine.csv"), [&](std::ostream& f) {
    CsvWriter csv(f);
    csv.header({"image", "energy", "eps_dot_x", "bound", "cos_phi", "slack", "holds"});
    for (auto& img : images) {
      FeatureMaps x = img.maps.channels() == 1
                          ? img.maps
                          : FeatureMaps(1, img.maps.height(), img.maps.width(), to_gray(img.maps).values());
      for (auto& p : x.data()) p = floor + (1.0 - floor) * p;
      const auto r = cosine_bound(x, kernel, spec);
      if (!r.holds) ++failures;
      csv.field(img.id).field(r.energy).field(r.eps_dot_x).field(r.bound).field(r.empirical);
      csv.field(r.empirical - r.bound).field(r.holds);
      csv.end_row();
    }
  });
  out << "images=" << images.size() << " failures=" << failures << '\n';
  return failures == 0 ? kExitOk : kExitVerification;
}

// ---- training ------------------------------------------------------------------------

struct TrainOptions {
  NetChoice net;
  std::string cnn_path;
  std::string dcn_path;
  std::string dist = "gaussian:0.015";
  ImageSource images;
  TrainConfig config;
};

int cmd_train(const Globals& g, TrainOptions t, std::ostream& out) {
  const auto images = resolve_images(t.images, g.seed);
  const FeatureMaps& first = images.front().maps;
  const Dims dims{first.channels(), first.height(), first.width()};
  NetworkSpec cnn, dcn;
  if (!t.cnn_path.empty() || !t.dcn_path.empty()) {
    if (t.cnn_path.empty() || t.dcn_path.empty()) throw ParameterError("--cnn and --dcn go together");
    cnn = load_network(t.cnn_path);
    dcn = load_network(t.dcn_path);
  } else {
    const auto halves = build_preset_halves(t.net.preset, dims, t.net.options());
    cnn = halves.encoder;
    dcn = halves.decoder;
  }
  cnn.validate();
  dcn.validate();
  std::vector<FeatureMaps> data;
  for (const auto& img : images) {
    if (img.maps.channels() != dims.channels || img.maps.height() != dims.height || img.maps.width() != dims.width) {
      throw ShapeError("training images must share one size; " + img.id + " differs");
    }
    data.push_back(img.maps);
  }
  const auto bank = sample_filterbank(DistributionSpec::parse(t.dist), cnn.filter_shapes(), g.seed);
  t.config.seed = g.seed;
  t.config.threads = g.threads;
  const auto result = train_dcn(cnn, bank, dcn, data, t.config);
  write_file(out_path(g, "train_loss.csv"), [&](std::ostream& f) { write_loss_csv(f, result.history); });
  save_checkpoint(out_path(g, "dcn_checkpoint.bin"), result.params);
  save_filterbank(out_path(g, "cnn_bank.bin"), bank);
  write_file(out_path(g, "cnn.json"), [&](std::ostream& f) { f << to_json(cnn) << '\n'; });
  write_file(out_path(g, "dcn.json"), [&](std::ostream& f) { f << to_json(dcn) << '\n'; });
  out << "initial_loss=" << fmt(result.history.front().loss) << " final_loss=" << fmt(result.history.back().loss)
      << '\n';
  return kExitOk;
}

int exit_code_for(const Error& e) {
  if (dynamic_cast<const IoError*>(&e) || dynamic_cast<const DegenerateInputError*>(&e) ||
      dynamic_cast<const ShapeError*>(&e) || dynamic_cast<const PreconditionError*>(&e)) {
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Random-weight CNN/DCN reconstruction experiments", "rcd"};
  app.fallthrough();
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "master seed")->capture_default_str();
  app.add_option("--out", g.out, "output directory")->capture_default_str();
  app.add_option("--threads", g.threads, "worker threads (0 = all cores)")->capture_default_str();

  std::function<int()> action;

  // reconstruct
  NetChoice rec_net;
  std::string rec_image, rec_dist = "gaussian:0.015", rec_norm = "auto", rec_name = "reconstruction.png";
  auto* rec = app.add_subcommand("reconstruct", "run one random CNN/DCN on an image; writes <out>/<name>");
  add_net_options(rec, rec_net, "rrvgg_conv1_deconv1");
  rec->add_option("--image", rec_image, "input PNG/PGM")->required();
  rec->add_option("--dist", rec_dist, "filter distribution family[:scale]")->capture_default_str();
  rec->add_option("--normalize", rec_norm, "auto, minmax or clamp")->capture_default_str();
  rec->add_option("--name", rec_name, "output file name")->capture_default_str();
  rec->callback([&] { action = [&] { return cmd_reconstruct(g, rec_net, rec_image, rec_dist, rec_norm, rec_name, out); }; });

  // sweeps
  NetChoice sc_net;
  std::vector<int> sc_values{4, 16, 64, 256};
  int sc_nets = 10;
  std::string sc_dist = "gaussian:0.015";
  ImageSource sc_src;
  auto* sc = app.add_subcommand(
      "sweep-channels",
      "SSIM/Pearson vs channel count. Writes sweep_channels_raw.csv (param,net,image,ssim,pearson) and "
      "sweep_channels_aggregate.csv (param,ssim_mean,ssim_std,corr_mean,corr_std; std over networks, n-1)");
  add_net_options(sc, sc_net, "rrvgg_conv1_deconv1");
  sc->add_option("--values", sc_values, "channel counts")->capture_default_str()->delimiter(',');
  sc->add_option("--nets", sc_nets, "networks per value")->capture_default_str();
  sc->add_option("--dist", sc_dist, "filter distribution")->capture_default_str();
  add_image_source(sc, sc_src);
  sc->callback([&] {
    action = [&] { return cmd_sweep(g, SweepAxis::channels, sc_net, sc_values, sc_nets, sc_dist, sc_src, "sweep_channels", out); };
  });

  NetChoice sk_net;
  std::vector<int> sk_values{3, 7, 11, 15};
  int sk_nets = 10;
  std::string sk_dist = "gaussian:0.015";
  ImageSource sk_src;
  auto* sk = app.add_subcommand("sweep-kernel",
                                "SSIM/Pearson vs kernel size; same CSV schema as sweep-channels "
                                "(sweep_kernel_raw.csv, sweep_kernel_aggregate.csv)");
  add_net_options(sk, sk_net, "rrvgg_conv1_1");
  sk->add_option("--values", sk_values, "kernel sizes")->capture_default_str()->delimiter(',');
  sk->add_option("--nets", sk_nets, "networks per value")->capture_default_str();
  sk->add_option("--dist", sk_dist, "filter distribution")->capture_default_str();
  add_image_source(sk, sk_src);
  sk->callback([&] {
    action = [&] { return cmd_sweep(g, SweepAxis::kernel, sk_net, sk_values, sk_nets, sk_dist, sk_src, "sweep_kernel", out); };
  });

  // verify
  auto* verify = app.add_subcommand("verify", "check the infinite-width limit and its bounds");
  verify->require_subcommand(1);

  VerifyInput cl2;
  std::vector<int> cl2_channels{64, 256, 1024};
  auto* vl2 = verify->add_subcommand("converge-l2",
                                     "angle between outputs and the l2 limit; converge_l2_{field,trials,summary}.csv");
  add_verify_input(vl2, cl2, 16, 20);
  vl2->add_option("--values", cl2_channels, "channel counts")->capture_default_str()->delimiter(',');
  vl2->callback([&] { action = [&] { return cmd_converge(g, cl2, cl2_channels, false, out); }; });

  VerifyInput cav;
  std::vector<int> cav_channels{64, 256, 1024};
  auto* vav = verify->add_subcommand("converge-avg",
                                     "same with the average-pooling limit; converge_avg_{field,trials,summary}.csv");
  add_verify_input(vav, cav, 4, 20);
  vav->add_option("--values", cav_channels, "channel counts")->capture_default_str()->delimiter(',');
  vav->callback([&] { action = [&] { return cmd_converge(g, cav, cav_channels, true, out); }; });

  VerifyInput var;
  int var_channels = 1024, var_kernel = 3;
  double var_delta = 0.1;
  auto* vvar = verify->add_subcommand(
      "variance", "sin(Theta) against the variance bound; variance_{trials,summary}.csv; exit 3 if the "
                  "violation fraction exceeds delta");
  add_verify_input(vvar, var, 16, 100);
  vvar->add_option("--channels", var_channels, "channels per layer")->capture_default_str();
  vvar->add_option("--delta", var_delta, "failure probability")->capture_default_str();
  vvar->add_option("--kernel", var_kernel, "kernel of the built-in two-layer net")->capture_default_str();
  vvar->callback([&] { action = [&] { return cmd_variance(g, var, var_channels, var_delta, var_kernel, out); }; });

  ImageSource cos_src;
  cos_src.count = 10;
  std::string cos_image, cos_net;
  int cos_kernel = 3;
  double cos_floor = 0.05;
  auto* vcos = verify->add_subcommand(
      "cosine", "cosine lower bound per image; cosine.csv; exit 3 unless it holds for every image. "
                "Pixels are mapped to floor + (1 - floor) * x first");
  add_image_source(vcos, cos_src);
  vcos->add_option("--image", cos_image, "single input image");
  vcos->add_option("--net", cos_net, "stride-1 same-size def51 network (default: two-layer)");
  vcos->add_option("--kernel", cos_kernel, "odd kernel of the two-layer net")->capture_default_str();
  vcos->add_option("--floor", cos_floor, "positive pixel floor")->capture_default_str();
  vcos->callback([&] { action = [&] { return cmd_cosine(g, cos_src, cos_image, cos_net, cos_kernel, cos_floor, out); }; });

  // train-dcn
  TrainOptions tr;
  tr.images.count = 16;
  tr.net.channels = 16;
  tr.config.max_iters = 200;
  tr.config.batch_size = 8;
  tr.config.lr0 = 1e-3;
  auto* train = app.add_subcommand(
      "train-dcn", "train a decoder for a fixed random encoder; train_loss.csv (iter,lr,loss), "
                   "dcn_checkpoint.bin, cnn_bank.bin, cnn.json, dcn.json");
  add_net_options(train, tr.net, "rrvgg_conv1_1");
  train->add_option("--cnn", tr.cnn_path, "encoder NetworkSpec JSON");
  train->add_option("--dcn", tr.dcn_path, "decoder NetworkSpec JSON");
  train->add_option("--dist", tr.dist, "encoder filter distribution")->capture_default_str();
  add_image_source(train, tr.images);
  train->add_option("--iters", tr.config.max_iters, "iterations")->capture_default_str();
  train->add_option("--batch", tr.config.batch_size, "mini-batch size")->capture_default_str();
  train->add_option("--lr", tr.config.lr0, "initial learning rate")->capture_default_str();
  train->add_option("--weight-decay", tr.config.weight_decay, "weight decay")->capture_default_str();
  train->add_flag("--decoupled", tr.config.decoupled_decay, "apply weight decay outside the Adam moments");
  train->add_option("--milestones", tr.config.milestones, "LR milestones (default 50%,75%)")->delimiter(',');
  train->add_option("--decay", tr.config.decay_factor, "LR factor per milestone")->capture_default_str();
  train->add_option("--checkpoint-every", tr.config.checkpoint_every, "iterations between loss records")
      ->capture_default_str();
  train->callback([&] { action = [&] { return cmd_train(g, tr, out); }; });

  // metrics
  std::string ma, mb;
  auto* met = app.add_subcommand("metrics", "prints pearson=<r> ssim=<s> for two images");
  met->add_option("--a", ma, "reference image")->required();
  met->add_option("--b", mb, "reconstruction")->required();
  met->callback([&] {
    action = [&] {
      const GrayImage a = to_gray(load_image(ma));
      const GrayImage b = to_gray(load_image(mb));
      out << "pearson=" << fmt(pearson(a, b)) << " ssim=" << fmt(ssim_reported(a, b)) << '\n';
      return static_cast<int>(kExitOk);
    };
  });

  // gen-data
  int gd_count = 50, gd_size = 32, gd_channels = 1;
  double gd_smooth = 1.5;
  auto* gen = app.add_subcommand("gen-data", "write blurred-noise PNGs img_NNNN.png into --out");
  gen->add_option("--count", gd_count, "number of images")->capture_default_str();
  gen->add_option("--size", gd_size, "side length")->capture_default_str();
  gen->add_option("--smoothness", gd_smooth, "gaussian blur sigma (0 = white noise)")->capture_default_str();
  gen->add_option("--channels", gd_channels, "1 or 3")->capture_default_str()->check(CLI::IsMember({1, 3}));
  gen->callback([&] {
    action = [&] {
      const auto files = generate_synthetic(g.out, gd_count, gd_size, gd_smooth, g.seed, gd_channels);
      out << "wrote " << files.size() << " images to " << g.out << '\n';
      return static_cast<int>(kExitOk);
    };
  });

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }
  try {
    return action ? action() : kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e);
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
}

}  // namespace rcd
