#include "rcd/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <string>

#include "rcd/binary_io.hpp"
#include "rcd/csv.hpp"
#include "rcd/error.hpp"
#include "rcd/gemm.hpp"
#include "rcd/parallel.hpp"
#include "rcd/random_weights.hpp"

namespace rcd {
namespace {

constexpr char kCheckpointMagic[9] = "RCDDCNCK";
constexpr std::uint32_t kCheckpointVersion = 1;

FilterBank as_bank(const DcnParams& params) {
  FilterBank bank;
  bank.layers = params.filters;
  return bank;
}

// Scatter-add of patch gradients back onto the input plane (inverse of
// extract_patches).
FeatureMaps col2im(const std::vector<double>& dp, int channels, int h, int w, const PatchIndex& idx) {
  FeatureMaps dx(channels, h, w);
  const std::size_t cols = idx.patch_count();
  const int slots = idx.slots();
  for (int c = 0; c < channels; ++c) {
    auto plane = dx.channel(c);
    for (int s = 0; s < slots; ++s) {
      const double* row = dp.data() + (static_cast<std::size_t>(c) * slots + s) * cols;
      for (std::size_t m = 0; m < cols; ++m) {
        const int p = idx.slot(m, s);
        if (p != PatchIndex::kPadding) plane[static_cast<std::size_t>(p)] += row[m];
      }
    }
  }
  return dx;
}

}  // namespace

void TrainConfig::validate() const {
  if (!(lr0 > 0.0)) throw ParameterError("learning rate must be positive");
  if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0)) {
    throw ParameterError("Adam betas must lie in (0, 1)");
  }
  if (!(adam_eps > 0.0)) throw ParameterError("Adam epsilon must be positive");
  if (!(weight_decay >= 0.0)) throw ParameterError("weight decay must be >= 0");
  if (batch_size < 1) throw ParameterError("batch size must be >= 1");
  if (max_iters < 0) throw ParameterError("max_iters must be >= 0");
  if (checkpoint_every < 0) throw ParameterError("checkpoint interval must be >= 0");
  if (!(decay_factor > 0.0)) throw ParameterError("decay factor must be positive");
  for (int m : milestones)
    if (m < 1) throw ParameterError("milestones must be >= 1");
}

std::vector<int> TrainConfig::resolved_milestones() const {
  if (!milestones.empty()) {
    auto m = milestones;
    std::sort(m.begin(), m.end());
    return m;
  }
  return {max_iters / 2, max_iters * 3 / 4};
}

double TrainConfig::lr_at(int iter) const {
  double lr = lr0;
  for (int m : resolved_milestones()) {
    if (iter >= m) lr *= decay_factor;
  }
  return lr;
}

std::vector<FilterShape> DcnParams::shapes() const {
  std::vector<FilterShape> s;
  for (const auto& f : filters) s.push_back({f.count, f.length});
  return s;
}

DcnParams msra_init(const std::vector<FilterShape>& shapes, double slope, std::uint64_t seed) {
  DcnParams p;
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    const auto& s = shapes[i];
    if (s.count <= 0 || s.length <= 0) throw ShapeError("filter shape must be positive");
    const double sd = std::sqrt(2.0 / ((1.0 + slope * slope) * s.length));
    FilterLayer layer{s.count, s.length, std::vector<double>(static_cast<std::size_t>(s.count) * s.length)};
    for (int j = 0; j < s.count; ++j) {
      fill_filter(DistributionSpec::gaussian(sd), seed, static_cast<int>(i), j,
                  {layer.values.data() + static_cast<std::size_t>(j) * s.length,
                   static_cast<std::size_t>(s.length)});
    }
    p.m.emplace_back(layer.values.size(), 0.0);
    p.v.emplace_back(layer.values.size(), 0.0);
    p.filters.push_back(std::move(layer));
  }
  return p;
}

double loss_l2(const FeatureMaps& output, const FeatureMaps& target) {
  if (!output.same_shape(target)) throw ShapeError("loss: output and target differ in shape");
  double s = 0.0;
  for (std::size_t i = 0; i < output.size(); ++i) {
    const double d = output.data()[i] - target.data()[i];
    s += d * d;
  }
  return s;
}

DcnCache dcn_forward(const NetworkSpec& dcn, const DcnParams& params, const FeatureMaps& x) {
  if (dcn.mode != Mode::empirical) throw ParameterError("trainable decoders must be empirical-mode");
  auto trace = forward(dcn, as_bank(params), x, true);
  DcnCache cache;
  cache.activations.reserve(trace.layers.size() + 1);
  cache.activations.push_back(x);
  for (auto& l : trace.layers) cache.activations.push_back(std::move(l));
  return cache;
}

Gradients backward(const NetworkSpec& dcn, const DcnParams& params, const DcnCache& cache,
                   const FeatureMaps& loss_grad) {
  if (cache.activations.size() != dcn.layers.size() + 1) {
    throw PreconditionError("backward needs the retained forward cache of this decoder");
  }
  if (!loss_grad.same_shape(cache.output())) throw ShapeError("loss gradient shape mismatch");
  Gradients grads;
  for (const auto& f : params.filters) grads.emplace_back(f.values.size(), 0.0);

  int conv_index = dcn.conv_count();
  FeatureMaps g = loss_grad;
  for (std::size_t i = dcn.layers.size(); i-- > 0;) {
    const auto& l = dcn.layers[i];
    const FeatureMaps& in = cache.activations[i];
    switch (l.kind) {
      case LayerKind::conv: {
        --conv_index;
        const auto& f = params.filters[static_cast<std::size_t>(conv_index)];
        const PatchIndex idx = l.patch_index(in.height(), in.width());
        const PatchedMaps patches = extract_patches(in, idx);
        const std::size_t cols = static_cast<std::size_t>(patches.cols);
        // dF += G * P^T
        detail::gemm_a_bt_accumulate(static_cast<std::size_t>(f.count), static_cast<std::size_t>(f.length), cols,
                                     g.data().data(), cols, patches.data.data(), cols,
                                     grads[static_cast<std::size_t>(conv_index)].data(),
                                     static_cast<std::size_t>(f.length));
        if (conv_index == 0 && i == 0) {
          g = FeatureMaps();  // input gradient not needed
          break;
        }
        // dP = F^T * G
        std::vector<double> dp(static_cast<std::size_t>(f.length) * cols, 0.0);
        detail::gemm_at_b_accumulate(static_cast<std::size_t>(f.length), cols, static_cast<std::size_t>(f.count),
                                     f.values.data(), static_cast<std::size_t>(f.length),
                                     g.data().data(), cols, dp.data(), cols);
        g = col2im(dp, in.channels(), in.height(), in.width(), idx);
        break;
      }
      case LayerKind::relu:
      case LayerKind::leaky_relu: {
        const double slope = l.kind == LayerKind::relu ? 0.0 : l.slope;
        for (std::size_t k = 0; k < g.size(); ++k) {
          if (!(in.data()[k] > 0.0)) g.data()[k] *= slope;
        }
        break;
      }
      case LayerKind::scale:
        for (auto& v : g.data()) v *= l.value;
        break;
      case LayerKind::upsample: {
        FeatureMaps dx(in.channels(), in.height(), in.width());
        for (int c = 0; c < in.channels(); ++c) {
          for (int y = 0; y < in.height(); ++y) {
            for (int x = 0; x < in.width(); ++x) dx.at(c, y, x) = g.at(c, y * l.factor, x * l.factor);
          }
        }
        g = std::move(dx);
        break;
      }
      case LayerKind::crop: {
        FeatureMaps dx(in.channels(), in.height(), in.width());
        for (int c = 0; c < g.channels(); ++c) {
          for (int y = 0; y < g.height(); ++y) {
            for (int x = 0; x < g.width(); ++x) dx.at(c, y, x) = g.at(c, y, x);
          }
        }
        g = std::move(dx);
        break;
      }
      case LayerKind::channel_mean: {
        FeatureMaps dx(in.channels(), in.height(), in.width());
        const double inv = 1.0 / in.channels();
        for (int c = 0; c < in.channels(); ++c) {
          auto plane = dx.channel(c);
          const auto src = g.channel(0);
          for (std::size_t p = 0; p < plane.size(); ++p) plane[p] = src[p] * inv;
        }
        g = std::move(dx);
        break;
      }
      case LayerKind::avg_pool: {
        const PatchIndex idx = l.patch_index(in.height(), in.width());
        FeatureMaps dx(in.channels(), in.height(), in.width());
        const double inv = 1.0 / idx.slots();
        for (int c = 0; c < in.channels(); ++c) {
          auto plane = dx.channel(c);
          const auto src = g.channel(c);
          for (std::size_t m = 0; m < idx.patch_count(); ++m) {
            for (int p : idx.window(m)) {
              if (p != PatchIndex::kPadding) plane[static_cast<std::size_t>(p)] += src[m] * inv;
            }
          }
        }
        g = std::move(dx);
        break;
      }
      case LayerKind::max_pool:
      case LayerKind::l2_pool:
        throw VariantError(std::string(kind_name(l.kind)) + " layers cannot be trained through");
    }
  }
  return grads;
}

double loss_and_gradient(const NetworkSpec& dcn, const DcnParams& params, const FeatureMaps& x,
                         const FeatureMaps& target, Gradients* grads) {
  const auto cache = dcn_forward(dcn, params, x);
  const double loss = loss_l2(cache.output(), target);
  if (grads) {
    FeatureMaps g = cache.output();
    for (std::size_t k = 0; k < g.size(); ++k) g.data()[k] = 2.0 * (g.data()[k] - target.data()[k]);
    *grads = backward(dcn, params, cache, g);
  }
  return loss;
}

void adam_step(DcnParams& params, const Gradients& grads, const TrainConfig& config, double lr) {
  if (grads.size() != params.filters.size()) throw ShapeError("gradient layer count mismatch");
  ++params.step;
  const double t = static_cast<double>(params.step);
  const double c1 = 1.0 - std::pow(config.beta1, t);
  const double c2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t i = 0; i < grads.size(); ++i) {
    auto& w = params.filters[i].values;
    auto& m = params.m[i];
    auto& v = params.v[i];
    if (grads[i].size() != w.size()) throw ShapeError("gradient size mismatch");
    for (std::size_t k = 0; k < w.size(); ++k) {
      double g = grads[i][k];
      if (!config.decoupled_decay) g += config.weight_decay * w[k];
      m[k] = config.beta1 * m[k] + (1.0 - config.beta1) * g;
      v[k] = config.beta2 * v[k] + (1.0 - config.beta2) * g * g;
      const double mhat = m[k] / c1;
      const double vhat = v[k] / c2;
      w[k] -= lr * mhat / (std::sqrt(vhat) + config.adam_eps);
      if (config.decoupled_decay) w[k] -= lr * config.weight_decay * w[k];
    }
  }
}

std::vector<FeatureMaps> encode_all(const NetworkSpec& cnn, const FilterBank& bank,
                                    const std::vector<FeatureMaps>& images, unsigned threads) {
  std::vector<FeatureMaps> reps(images.size());
  parallel_for(images.size(), threads, [&](std::size_t i) { reps[i] = forward(cnn, bank, images[i]).output; });
  return reps;
}

TrainResult train_dcn(const NetworkSpec& cnn, const FilterBank& cnn_bank, const NetworkSpec& dcn,
                      const std::vector<FeatureMaps>& dataset, const TrainConfig& config,
                      const DcnParams* init) {
  config.validate();
  if (dataset.empty()) throw ParameterError("training needs at least one image");
  if (cnn.output_dims() != dcn.input) throw ShapeError("decoder input does not match encoder output");
  if (dcn.output_dims() != cnn.input) throw ShapeError("decoder output does not match encoder input");

  TrainResult result;
  if (init) {
    if (init->shapes() != dcn.filter_shapes()) throw ShapeError("initial parameters do not match the decoder");
    result.params = *init;
  } else {
    double slope = 0.0;
    for (const auto& l : dcn.layers) {
      if (l.kind == LayerKind::leaky_relu) slope = l.slope;
    }
    result.params = msra_init(dcn.filter_shapes(), slope, substream_seed(config.seed, 0xdc0, 0));
  }
  const auto reps = encode_all(cnn, cnn_bank, dataset, config.threads);
  const std::size_t n = dataset.size();
  const int every = config.checkpoint_every > 0 ? config.checkpoint_every : std::max(1, config.max_iters / 10);

  std::vector<double> item_loss(n);
  auto dataset_loss = [&] {
    parallel_for(n, config.threads, [&](std::size_t i) {
      item_loss[i] = loss_and_gradient(dcn, result.params, reps[i], dataset[i], nullptr);
    });
    return std::accumulate(item_loss.begin(), item_loss.end(), 0.0);
  };

  std::mt19937_64 rng(substream_seed(config.seed, 0xba7c, 0));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::size_t cursor = 0;

  const std::size_t batch = std::min<std::size_t>(static_cast<std::size_t>(config.batch_size), n);
  std::vector<Gradients> item_grads(batch);
  std::vector<std::size_t> members(batch);

  result.history.push_back({0, config.lr_at(0), dataset_loss()});
  for (int iter = 0; iter < config.max_iters; ++iter) {
    for (std::size_t b = 0; b < batch; ++b) {
      if (cursor == n) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      members[b] = order[cursor++];
    }
    parallel_for(batch, config.threads, [&](std::size_t b) {
      loss_and_gradient(dcn, result.params, reps[members[b]], dataset[members[b]], &item_grads[b]);
    });
    Gradients total = item_grads[0];
    for (std::size_t b = 1; b < batch; ++b) {
      for (std::size_t i = 0; i < total.size(); ++i) {
        for (std::size_t k = 0; k < total[i].size(); ++k) total[i][k] += item_grads[b][i][k];
      }
    }
    adam_step(result.params, total, config, config.lr_at(iter));
    if ((iter + 1) % every == 0 || iter + 1 == config.max_iters) {
      result.history.push_back({iter + 1, config.lr_at(iter), dataset_loss()});
    }
  }
  return result;
}

void write_checkpoint(std::ostream& out, const DcnParams& params) {
  using namespace detail;
  put_magic(out, kCheckpointMagic);
  put_u32(out, kCheckpointVersion);
  put_u64(out, static_cast<std::uint64_t>(params.step));
  put_u32(out, static_cast<std::uint32_t>(params.filters.size()));
  for (const auto& f : params.filters) {
    put_u32(out, static_cast<std::uint32_t>(f.count));
    put_u32(out, static_cast<std::uint32_t>(f.length));
  }
  for (std::size_t i = 0; i < params.filters.size(); ++i) {
    for (double v : params.filters[i].values) put_f64(out, v);
    for (double v : params.m[i]) put_f64(out, v);
    for (double v : params.v[i]) put_f64(out, v);
  }
  if (!out) throw IoError("failed writing checkpoint");
}

DcnParams read_checkpoint(std::istream& in) {
  using namespace detail;
  expect_magic(in, kCheckpointMagic, "checkpoint");
  const auto version = get_u32(in);
  if (version != kCheckpointVersion) throw IoError("unsupported checkpoint version " + std::to_string(version));
  DcnParams p;
  p.step = static_cast<std::int64_t>(get_u64(in));
  const auto layers = get_u32(in);
  p.filters.resize(layers);
  for (auto& f : p.filters) {
    f.count = static_cast<int>(get_u32(in));
    f.length = static_cast<int>(get_u32(in));
    if (f.count <= 0 || f.length <= 0) throw IoError("checkpoint has an empty layer");
  }
  for (auto& f : p.filters) {
    const std::size_t size = static_cast<std::size_t>(f.count) * f.length;
    f.values.resize(size);
    for (double& v : f.values) v = get_f64(in);
    auto& m = p.m.emplace_back(size);
    for (double& v : m) v = get_f64(in);
    auto& s = p.v.emplace_back(size);
    for (double& v : s) v = get_f64(in);
  }
  return p;
}

void save_checkpoint(const std::filesystem::path& path, const DcnParams& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  write_checkpoint(out, params);
}

DcnParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return read_checkpoint(in);
}

void write_loss_csv(std::ostream& out, const std::vector<LossRecord>& history) {
  CsvWriter csv(out);
  csv.header({"iter", "lr", "loss"});
  for (const auto& r : history) {
    csv.field(r.iter).field(r.lr).field(r.loss);
    csv.end_row();
  }
}

}  // namespace rcd
