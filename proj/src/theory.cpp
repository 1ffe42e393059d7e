#include "rcd/theory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

#include "rcd/csv.hpp"
#include "rcd/error.hpp"
#include "rcd/parallel.hpp"

namespace rcd {
namespace {

enum class Op { conv, l2_pool, avg_pool, max_pool, upsample, crop, mean };

// A def51 network flattened into the operations the limit analysis tracks:
// relu is folded into its conv, the mean is the output head.
struct Stage {
  Op op;
  LayerSpec layer;
  Dims in;
  Dims out;
  int conv_index = -1;
  bool last_conv = false;
};

std::vector<Stage> compile(const NetworkSpec& spec) {
  if (spec.mode != Mode::def51) {
    throw ParameterError("theory routines need a def51-mode network");
  }
  spec.validate();
  const auto trace = spec.dim_trace();
  std::vector<Stage> stages;
  int conv_index = 0;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& l = spec.layers[i];
    Stage s{Op::conv, l, trace[i], trace[i + 1]};
    switch (l.kind) {
      case LayerKind::conv: s.op = Op::conv; s.conv_index = conv_index++; break;
      case LayerKind::relu: continue;
      case LayerKind::l2_pool: s.op = Op::l2_pool; break;
      case LayerKind::avg_pool: s.op = Op::avg_pool; break;
      case LayerKind::max_pool: s.op = Op::max_pool; break;
      case LayerKind::upsample: s.op = Op::upsample; break;
      case LayerKind::crop: s.op = Op::crop; break;
      case LayerKind::channel_mean: s.op = Op::mean; break;
      default: throw ParameterError("unexpected layer in def51 network");
    }
    stages.push_back(s);
  }
  for (auto it = stages.rbegin(); it != stages.rend(); ++it) {
    if (it->op == Op::conv) {
      it->last_conv = true;
      break;
    }
  }
  return stages;
}

std::vector<Moments> resolve_moments(const LayerDistributions& dists, int convs) {
  if (dists.empty()) throw ParameterError("no filter distribution given");
  if (dists.size() != 1 && static_cast<int>(dists.size()) != convs) {
    throw ParameterError("expected 1 or " + std::to_string(convs) + " distributions, got " +
                         std::to_string(dists.size()));
  }
  std::vector<Moments> out;
  for (int i = 0; i < convs; ++i) {
    const auto& d = dists.size() == 1 ? dists[0] : dists[static_cast<std::size_t>(i)];
    if (!d.isotropic()) {
      throw IsotropyError("limit analysis needs isotropic filters; " +
                          std::string(family_name(d.family)) + " entries are not");
    }
    out.push_back(moments(d));
  }
  return out;
}

// Per-pixel quantity on an h x w grid.
struct Grid {
  int h = 0;
  int w = 0;
  std::vector<double> v;
};

Grid pixel_energy(const FeatureMaps& x) {
  Grid g{x.height(), x.width(), std::vector<double>(x.pixels(), 0.0)};
  for (int c = 0; c < x.channels(); ++c) {
    const auto plane = x.channel(c);
    for (std::size_t p = 0; p < plane.size(); ++p) g.v[p] += plane[p] * plane[p];
  }
  return g;
}

// Sums `e` over each window, times `factor`.
Grid window_sum(const Grid& e, const LayerSpec& l, double factor) {
  const PatchIndex idx = l.patch_index(e.h, e.w);
  Grid out{idx.output_height(), idx.output_width(), std::vector<double>(idx.patch_count(), 0.0)};
  for (std::size_t m = 0; m < idx.patch_count(); ++m) {
    double s = 0.0;
    for (int slot : idx.window(m)) {
      if (slot != PatchIndex::kPadding) s += e.v[static_cast<std::size_t>(slot)];
    }
    out.v[m] = factor * s;
  }
  return out;
}

Grid upsample_grid(const Grid& e, int factor) {
  Grid out{e.h * factor, e.w * factor,
           std::vector<double>(static_cast<std::size_t>(e.h) * e.w * factor * factor, 0.0)};
  for (int y = 0; y < e.h; ++y) {
    for (int x = 0; x < e.w; ++x) {
      out.v[static_cast<std::size_t>(y * factor) * out.w + x * factor] =
          e.v[static_cast<std::size_t>(y) * e.w + x];
    }
  }
  return out;
}

Grid crop_grid(const Grid& e, int h, int w) {
  Grid out{h, w, std::vector<double>(static_cast<std::size_t>(h) * w)};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      out.v[static_cast<std::size_t>(y) * w + x] = e.v[static_cast<std::size_t>(y) * e.w + x];
    }
  }
  return out;
}

// Result of the linear squared-norm recurrence.
struct EnergyRun {
  std::vector<Grid> layers;  // pixel energies of X^(0) .. X^(L-2)
  Grid last_patch;           // sum over the last conv's windows, after later crops
  double k2_product = 1.0;   // product of k2 over the non-final convs
};

// Propagates pixel energies; conv layers scale by k2 unless `unit_k2`.
EnergyRun run_energy(const std::vector<Stage>& stages, const std::vector<Moments>& mom,
                     Grid e, bool unit_k2) {
  EnergyRun run;
  run.layers.push_back(e);
  bool after_last_conv = false;
  for (const auto& s : stages) {
    switch (s.op) {
      case Op::conv: {
        if (s.last_conv) {
          e = window_sum(e, s.layer, 1.0);
          after_last_conv = true;
        } else {
          const double k2 = unit_k2 ? 1.0 : mom[static_cast<std::size_t>(s.conv_index)].k2;
          run.k2_product *= k2;
          e = window_sum(e, s.layer, k2);
          run.layers.push_back(e);
        }
        break;
      }
      case Op::l2_pool:
        e = window_sum(e, s.layer, 1.0);
        run.layers.push_back(e);
        break;
      case Op::upsample:
        e = upsample_grid(e, s.layer.factor);
        run.layers.push_back(e);
        break;
      case Op::crop:
        e = crop_grid(e, s.layer.height, s.layer.width);
        if (!after_last_conv) run.layers.back() = e;
        break;
      case Op::mean: break;
      case Op::avg_pool:
        throw VariantError("average pooling has no squared-norm recurrence; use the Gram variant");
      case Op::max_pool:
        throw VariantError("max pooling is not covered by the limit analysis");
    }
  }
  run.last_patch = std::move(e);
  return run;
}

}  // namespace

std::vector<int> RouteCountMap::receptive_set(int out) const {
  std::vector<int> set;
  for (int l = 0; l < in_pixels; ++l) {
    if (at(out, l) > 0.0) set.push_back(l);
  }
  return set;
}

int analysed_layer_count(const NetworkSpec& spec) {
  int n = 0;
  for (const auto& s : compile(spec)) {
    if (s.op != Op::crop) ++n;
  }
  return n;
}

ConvergenceField convergence_field_l2(const NetworkSpec& spec, const LayerDistributions& dists,
                                      const FeatureMaps& x) {
  const auto stages = compile(spec);
  const auto mom = resolve_moments(dists, spec.conv_count());
  if (x.channels() != spec.input.channels || x.height() != spec.input.height ||
      x.width() != spec.input.width) {
    throw ShapeError("convergence_field_l2: input does not match the network");
  }
  const auto run = run_energy(stages, mom, pixel_energy(x), false);

  ConvergenceField field;
  for (const auto& g : run.layers) {
    std::vector<double> norms(g.v.size());
    std::transform(g.v.begin(), g.v.end(), norms.begin(), [](double v) { return std::sqrt(v); });
    field.layer_norms.push_back(std::move(norms));
  }
  const double k1 = mom.back().k1;
  field.k = k1 * std::sqrt(run.k2_product);
  field.height = run.last_patch.h;
  field.width = run.last_patch.w;
  field.z_star.resize(run.last_patch.v.size());
  field.f_star.resize(run.last_patch.v.size());
  for (std::size_t i = 0; i < field.z_star.size(); ++i) {
    field.z_star[i] = std::sqrt(run.last_patch.v[i] / run.k2_product);
    field.f_star[i] = field.k * field.z_star[i];
  }
  return field;
}

RouteCountMap compute_route_counts(const NetworkSpec& spec) {
  const auto stages = compile(spec);
  const std::vector<Moments> unit(static_cast<std::size_t>(spec.conv_count()));
  RouteCountMap map;
  map.in_pixels = spec.input.height * spec.input.width;
  Grid probe{spec.input.height, spec.input.width,
             std::vector<double>(static_cast<std::size_t>(map.in_pixels), 0.0)};
  for (int l = 0; l < map.in_pixels; ++l) {
    probe.v.assign(probe.v.size(), 0.0);
    probe.v[static_cast<std::size_t>(l)] = 1.0;
    const auto run = run_energy(stages, unit, probe, true);
    if (l == 0) {
      map.out_pixels = static_cast<int>(run.last_patch.v.size());
      map.counts.assign(static_cast<std::size_t>(map.out_pixels) * map.in_pixels, 0.0);
    }
    for (int i = 0; i < map.out_pixels; ++i) {
      map.counts[static_cast<std::size_t>(i) * map.in_pixels + l] =
          run.last_patch.v[static_cast<std::size_t>(i)];
    }
  }
  return map;
}

// ---- average pooling: Gram recurrence ----------------------------------------

namespace {

struct GramGrid {
  int h = 0;
  int w = 0;
  std::vector<double> c;  // (h*w) x (h*w)

  std::size_t d() const { return static_cast<std::size_t>(h) * w; }
  double at(std::size_t j, std::size_t k) const { return c[j * d() + k]; }
};

GramGrid input_gram(const FeatureMaps& x) {
  GramGrid g{x.height(), x.width(), {}};
  const std::size_t d = g.d();
  g.c.assign(d * d, 0.0);
  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t k = j; k < d; ++k) {
      double s = 0.0;
      for (int ch = 0; ch < x.channels(); ++ch) {
        const auto plane = x.channel(ch);
        s += plane[j] * plane[k];
      }
      g.c[j * d + k] = s;
      g.c[k * d + j] = s;
    }
  }
  return g;
}

// Receptive-field norms z_j = sqrt(sum_{l in D_j} C_ll).
std::vector<double> window_norms(const GramGrid& g, const PatchIndex& idx) {
  std::vector<double> z(idx.patch_count());
  for (std::size_t j = 0; j < z.size(); ++j) {
    double s = 0.0;
    for (int slot : idx.window(j)) {
      if (slot != PatchIndex::kPadding) {
        s += g.at(static_cast<std::size_t>(slot), static_cast<std::size_t>(slot));
      }
    }
    z[j] = std::sqrt(std::max(0.0, s));
  }
  return z;
}

GramGrid gram_conv(const GramGrid& g, const LayerSpec& l, double k2) {
  const PatchIndex idx = l.patch_index(g.h, g.w);
  const auto z = window_norms(g, idx);
  GramGrid out{idx.output_height(), idx.output_width(), {}};
  const std::size_t d = out.d();
  out.c.assign(d * d, 0.0);
  const int slots = idx.slots();
  for (std::size_t j = 0; j < d; ++j) {
    const auto wj = idx.window(j);
    for (std::size_t k = j; k < d; ++k) {
      double value = 0.0;
      if (z[j] > 0.0 && z[k] > 0.0) {
        const auto wk = idx.window(k);
        double dot = 0.0;
        for (int s = 0; s < slots; ++s) {
          if (wj[static_cast<std::size_t>(s)] != PatchIndex::kPadding &&
              wk[static_cast<std::size_t>(s)] != PatchIndex::kPadding) {
            dot += g.at(static_cast<std::size_t>(wj[static_cast<std::size_t>(s)]),
                        static_cast<std::size_t>(wk[static_cast<std::size_t>(s)]));
          }
        }
        const double zz = z[j] * z[k];
        value = k2 * angular_kernel_from_cos(dot / zz) * zz;
      }
      out.c[j * d + k] = value;
      out.c[k * d + j] = value;
    }
  }
  return out;
}

GramGrid gram_avg_pool(const GramGrid& g, const LayerSpec& l) {
  const PatchIndex idx = l.patch_index(g.h, g.w);
  GramGrid out{idx.output_height(), idx.output_width(), {}};
  const std::size_t d = out.d();
  out.c.assign(d * d, 0.0);
  const double inv = 1.0 / (static_cast<double>(idx.slots()) * idx.slots());
  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t k = j; k < d; ++k) {
      double s = 0.0;
      for (int a : idx.window(j)) {
        if (a == PatchIndex::kPadding) continue;
        for (int b : idx.window(k)) {
          if (b != PatchIndex::kPadding) {
            s += g.at(static_cast<std::size_t>(a), static_cast<std::size_t>(b));
          }
        }
      }
      out.c[j * d + k] = s * inv;
      out.c[k * d + j] = s * inv;
    }
  }
  return out;
}

GramGrid gram_upsample(const GramGrid& g, int factor) {
  GramGrid out{g.h * factor, g.w * factor, {}};
  const std::size_t d = out.d();
  out.c.assign(d * d, 0.0);
  auto first_slot = [&](std::size_t p) {
    const std::size_t y = p / static_cast<std::size_t>(g.w);
    const std::size_t x = p % static_cast<std::size_t>(g.w);
    return y * factor * out.w + x * factor;
  };
  for (std::size_t j = 0; j < g.d(); ++j) {
    for (std::size_t k = 0; k < g.d(); ++k) {
      out.c[first_slot(j) * d + first_slot(k)] = g.at(j, k);
    }
  }
  return out;
}

GramGrid gram_crop(const GramGrid& g, int h, int w) {
  GramGrid out{h, w, {}};
  const std::size_t d = out.d();
  out.c.resize(d * d);
  for (std::size_t j = 0; j < d; ++j) {
    const std::size_t sj = (j / w) * g.w + j % w;
    for (std::size_t k = 0; k < d; ++k) {
      const std::size_t sk = (k / w) * g.w + k % w;
      out.c[j * d + k] = g.at(sj, sk);
    }
  }
  return out;
}

}  // namespace

AvgConvergence convergence_field_avg(const NetworkSpec& spec, const LayerDistributions& dists,
                                     const FeatureMaps& x) {
  const auto stages = compile(spec);
  const auto mom = resolve_moments(dists, spec.conv_count());
  if (x.channels() != spec.input.channels || x.height() != spec.input.height ||
      x.width() != spec.input.width) {
    throw ShapeError("convergence_field_avg: input does not match the network");
  }
  AvgConvergence result;
  GramGrid g = input_gram(x);
  auto record = [&](const GramGrid& grid) {
    result.gram.gram_per_layer.push_back(grid.c);
    result.gram.pixels_per_layer.push_back(static_cast<int>(grid.d()));
    std::vector<double> norms(grid.d());
    for (std::size_t j = 0; j < grid.d(); ++j) norms[j] = std::sqrt(std::max(0.0, grid.at(j, j)));
    result.field.layer_norms.push_back(std::move(norms));
  };
  record(g);

  Grid z_final;
  bool after_last_conv = false;
  for (const auto& s : stages) {
    switch (s.op) {
      case Op::conv:
        if (s.last_conv) {
          const PatchIndex idx = s.layer.patch_index(g.h, g.w);
          z_final = Grid{idx.output_height(), idx.output_width(), window_norms(g, idx)};
          after_last_conv = true;
        } else {
          g = gram_conv(g, s.layer, mom[static_cast<std::size_t>(s.conv_index)].k2);
          record(g);
        }
        break;
      case Op::avg_pool:
        g = gram_avg_pool(g, s.layer);
        record(g);
        break;
      case Op::upsample:
        g = gram_upsample(g, s.layer.factor);
        record(g);
        break;
      case Op::crop:
        if (after_last_conv) {
          z_final = crop_grid(z_final, s.layer.height, s.layer.width);
        } else {
          g = gram_crop(g, s.layer.height, s.layer.width);
          result.gram.gram_per_layer.back() = g.c;
          result.gram.pixels_per_layer.back() = static_cast<int>(g.d());
          auto& norms = result.field.layer_norms.back();
          norms.resize(g.d());
          for (std::size_t j = 0; j < g.d(); ++j) norms[j] = std::sqrt(std::max(0.0, g.at(j, j)));
        }
        break;
      case Op::mean: break;
      case Op::l2_pool:
        throw VariantError("l2 pooling is covered by convergence_field_l2, not the Gram variant");
      case Op::max_pool:
        throw VariantError("max pooling is not covered by the limit analysis");
    }
  }
  result.field.k = mom.back().k1;
  result.field.height = z_final.h;
  result.field.width = z_final.w;
  result.field.z_star = z_final.v;
  result.field.f_star.resize(z_final.v.size());
  for (std::size_t i = 0; i < z_final.v.size(); ++i) {
    result.field.f_star[i] = result.field.k * z_final.v[i];
  }
  return result;
}

// ---- variance bounds -------------------------------------------------------------

double BoundReport::recompute() const {
  if (kind == "cosine") return 1.0 - eps_dot_x / energy;
  if (kind == "two_layer") {
    return std::sqrt(relative_variances.at(0) / (channels.at(0) * delta));
  }
  // multilayer
  double sum = 0.0;
  for (std::size_t i = 0; i < channels.size(); ++i) sum += relative_variances[i] / channels[i];
  const double inv = sum / (layers - 1);
  const double first = std::sqrt((layers - 1) * inv / delta);
  double lambda_product = 1.0;
  for (double l : lambdas) lambda_product *= l;
  return first + std::sqrt((layers - 2) * first * lambda_product);
}

BoundReport variance_bound_two_layer(double K1, int N, double delta) {
  if (!(delta > 0.0 && delta < 1.0)) throw ParameterError("delta must lie in (0,1)");
  if (N < 1) throw ParameterError("N must be >= 1");
  if (!(K1 >= 0.0) || !std::isfinite(K1)) throw ParameterError("K1 must be finite and >= 0");
  BoundReport r;
  r.kind = "two_layer";
  r.layers = 2;
  r.delta = delta;
  r.channels = {N};
  r.relative_variances = {K1};
  r.inv_n_bar = K1 / N;
  r.lambdas = {};
  r.bound = std::sqrt(K1 / (static_cast<double>(N) * delta));
  return r;
}

Partition partition_from_patches(const PatchIndex& p) {
  if (!p.is_partition()) {
    throw AssumptionError("patches overlap, include padding or leave pixels uncovered "
                          "(kernel " + std::to_string(p.kernel()) + ", stride " +
                          std::to_string(p.stride()) + ")");
  }
  Partition groups(p.patch_count());
  for (std::size_t m = 0; m < p.patch_count(); ++m) {
    const auto w = p.window(m);
    groups[m].assign(w.begin(), w.end());
  }
  return groups;
}

Partition single_group(int n) {
  Partition g(1);
  g[0].resize(static_cast<std::size_t>(n));
  std::iota(g[0].begin(), g[0].end(), 0);
  return g;
}

std::vector<double> epsilon_operator(const std::vector<double>& x, const Partition& groups) {
  if (groups.empty()) throw AssumptionError("empty partition");
  const std::size_t r = groups.front().size();
  std::vector<char> seen(x.size(), 0);
  std::vector<double> eps(x.size());
  for (const auto& g : groups) {
    if (g.size() != r || r == 0) throw AssumptionError("partition groups must share one size");
    double sum = 0.0;
    for (int j : g) {
      if (j < 0 || static_cast<std::size_t>(j) >= x.size()) {
        throw AssumptionError("partition index out of range");
      }
      if (seen[static_cast<std::size_t>(j)]) throw AssumptionError("partition groups overlap");
      seen[static_cast<std::size_t>(j)] = 1;
      sum += x[static_cast<std::size_t>(j)];
    }
    const double mean = sum / static_cast<double>(r);
    for (int j : g) eps[static_cast<std::size_t>(j)] = x[static_cast<std::size_t>(j)] - mean;
  }
  if (std::find(seen.begin(), seen.end(), 0) != seen.end()) {
    throw AssumptionError("partition does not cover every index");
  }
  return eps;
}

BoundReport variance_bound_multilayer(const NetworkSpec& spec, const LayerDistributions& dists,
                                      const FeatureMaps& x, double delta) {
  if (!(delta > 0.0 && delta < 1.0)) throw ParameterError("delta must lie in (0,1)");
  const auto stages = compile(spec);
  const auto mom = resolve_moments(dists, spec.conv_count());

  // Analysed ops (crops must be identities) and their single-route check.
  std::vector<Stage> ops;
  for (const auto& s : stages) {
    if (s.op == Op::crop) {
      if (s.in.height != s.out.height || s.in.width != s.out.width) {
        throw AssumptionError("multilayer variance bound does not handle non-trivial crops");
      }
      continue;
    }
    if (s.op == Op::avg_pool || s.op == Op::max_pool) {
      throw VariantError("multilayer variance bound needs l2 pooling");
    }
    if (s.op == Op::conv || s.op == Op::l2_pool) {
      if (!s.layer.patch_index(s.in.height, s.in.width).is_partition()) {
        throw AssumptionError("multilayer variance bound needs at most one route: every conv "
                              "and pool must tile its input (stride = kernel, no padding)");
      }
    }
    ops.push_back(s);
  }
  const int L = static_cast<int>(ops.size());

  // Pixel energies of X^(0) .. X^(L-1); X^(L-1) is proportional to the last
  // conv's window sums.
  const auto run = run_energy(stages, mom, pixel_energy(x), false);
  std::vector<Grid> energy = run.layers;
  energy.push_back(run.last_patch);
  if (static_cast<int>(energy.size()) != L) {
    throw ShapeError("internal: energy layers do not match analysed layers");
  }

  BoundReport r;
  r.kind = "multilayer";
  r.layers = L;
  r.delta = delta;

  // lambda_i over X^(i+1), partitioned by the windows of the op that consumes it.
  for (int i = 0; i + 1 < L; ++i) {
    const Grid& v = energy[static_cast<std::size_t>(i + 1)];
    const Stage& next = ops[static_cast<std::size_t>(i + 1)];
    Partition groups;
    if (next.op == Op::mean) {
      groups = single_group(static_cast<int>(v.v.size()));
    } else if (next.op == Op::upsample) {
      groups.resize(v.v.size());
      for (std::size_t j = 0; j < v.v.size(); ++j) groups[j] = {static_cast<int>(j)};
    } else {
      groups = partition_from_patches(next.layer.patch_index(v.h, v.w));
    }
    const auto eps = epsilon_operator(v.v, groups);
    const double norm2 = squared_norm(v.v);
    if (!(norm2 > 0.0)) throw DegenerateInputError("zero convergence energy; lambda undefined");
    const double ratio = squared_norm(eps) / norm2;
    if (!(ratio < 1.0)) throw DegenerateInputError("epsilon ratio >= 1; lambda undefined");
    r.lambdas.push_back(1.0 / std::sqrt(1.0 - ratio));
  }

  // 1/N-bar terms: K2 of the filters feeding X^(i), i = 1..L-2, then K1 of the last conv.
  int channels = spec.input.channels;
  const Moments* recent = &mom.front();
  double sum = 0.0;
  for (int i = 1; i <= L - 1; ++i) {
    const Stage& op = ops[static_cast<std::size_t>(i - 1)];
    if (op.op == Op::conv) {
      recent = &mom[static_cast<std::size_t>(op.conv_index)];
      channels = op.layer.out;
    }
    const double K = i == L - 1 ? recent->K1 : recent->K2;
    r.channels.push_back(channels);
    r.relative_variances.push_back(K);
    sum += K / channels;
  }
  r.inv_n_bar = sum / (L - 1);
  r.bound = r.recompute();
  return r;
}

// ---- cosine bound --------------------------------------------------------------

NetworkSpec two_layer_net(Dims input, int kernel, int channels) {
  NetworkSpec spec;
  spec.input = input;
  spec.mode = Mode::def51;
  spec.layers = {LayerSpec::conv(kernel, 1, kernel / 2, channels), LayerSpec::relu(),
                 LayerSpec::channel_mean()};
  return spec;
}

BoundReport cosine_bound(const FeatureMaps& x, int kernel, const std::optional<NetworkSpec>& spec) {
  if (x.channels() != 1) throw PreconditionError("cosine bound needs a single-channel image");
  for (double v : x.data()) {
    if (!(v > 0.0)) throw PreconditionError("cosine bound needs strictly positive pixels");
  }
  const std::size_t d = x.pixels();
  const auto& X = x.data();
  std::vector<double> weighted_mean(d, 0.0);
  std::vector<double> f_star;

  if (!spec) {
    if (kernel < 1 || kernel % 2 == 0) {
      throw ParameterError("cosine bound needs an odd kernel so windows are centred");
    }
    const auto net = two_layer_net({1, x.height(), x.width()}, kernel, 1);
    f_star = convergence_field_l2(net, {DistributionSpec::gaussian(1.0)}, x).f_star;
    const PatchIndex idx(x.height(), x.width(), kernel, 1, kernel / 2);
    const double inv = 1.0 / idx.slots();
    for (std::size_t t = 0; t < d; ++t) {
      double s = 0.0;
      for (int a : idx.window(t)) {
        if (a != PatchIndex::kPadding) s += X[static_cast<std::size_t>(a)];
      }
      weighted_mean[t] = s * inv;
    }
  } else {
    const auto out = spec->output_dims();
    if (spec->input.channels != 1 || out.height != x.height() || out.width != x.width() ||
        spec->input.height != x.height() || spec->input.width != x.width()) {
      throw AssumptionError("weighted cosine bound needs a single-channel network whose output "
                            "has the input's size");
    }
    f_star = convergence_field_l2(*spec, {DistributionSpec::gaussian(1.0)}, x).f_star;
    const auto routes = compute_route_counts(*spec);
    // Route totals per output pixel (W) and per input pixel (S).
    double w_max = 0.0;
    std::vector<double> out_of(d, 0.0);
    for (int t = 0; t < routes.out_pixels; ++t) {
      double total = 0.0;
      for (int a = 0; a < routes.in_pixels; ++a) {
        total += routes.at(t, a);
        out_of[static_cast<std::size_t>(a)] += routes.at(t, a);
      }
      w_max = std::max(w_max, total);
    }
    const double s_max = *std::max_element(out_of.begin(), out_of.end());
    const double norm = std::sqrt(w_max * s_max);
    for (int t = 0; t < routes.out_pixels; ++t) {
      double s = 0.0;
      for (int a = 0; a < routes.in_pixels; ++a) s += routes.at(t, a) * X[static_cast<std::size_t>(a)];
      weighted_mean[static_cast<std::size_t>(t)] = s / norm;
    }
  }

  BoundReport r;
  r.kind = "cosine";
  r.energy = squared_norm(X);
  for (std::size_t t = 0; t < d; ++t) r.eps_dot_x += (X[t] - weighted_mean[t]) * X[t];
  r.bound = r.recompute();
  r.empirical = cos_angle(X, f_star);
  r.holds = r.empirical >= r.bound - 1e-9;
  return r;
}

// ---- Monte Carlo ---------------------------------------------------------------

double cos_angle(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("cos_angle: length mismatch");
  const double na = std::sqrt(squared_norm(a));
  const double nb = std::sqrt(squared_norm(b));
  if (na == 0.0 || nb == 0.0) return 0.0;
  double dot = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
  return std::clamp(dot / (na * nb), -1.0, 1.0);
}

double sin_angle(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("sin_angle: length mismatch");
  const double na = std::sqrt(squared_norm(a));
  const double nb = std::sqrt(squared_norm(b));
  if (na == 0.0 || nb == 0.0) return 1.0;
  // Component of a-hat orthogonal to b-hat; stable for small angles.
  double dot = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) dot += (a[i] / na) * (b[i] / nb);
  double perp = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double v = a[i] / na - dot * (b[i] / nb);
    perp += v * v;
  }
  return std::min(1.0, std::sqrt(perp));
}

std::vector<FeatureMaps> mc_outputs(const NetworkSpec& spec, const DistributionSpec& dist,
                                    const FeatureMaps& x, int channels, int trials,
                                    std::uint64_t seed, unsigned threads) {
  if (trials < 1) throw ParameterError("need at least one trial");
  const NetworkSpec net = with_uniform_channels(spec, channels);
  net.validate();
  const auto shapes = net.filter_shapes();
  std::vector<FeatureMaps> outputs(static_cast<std::size_t>(trials));
  parallel_for(outputs.size(), threads, [&](std::size_t t) {
    const auto bank = sample_filterbank(dist, shapes, substream_seed(seed, t, 0x5eed));
    outputs[t] = forward(net, bank, x).output;
  });
  return outputs;
}

std::vector<BoundReport> mc_verify(const NetworkSpec& spec, const DistributionSpec& dist,
                                   const FeatureMaps& x, int channels, int trials, double delta,
                                   std::uint64_t seed, unsigned threads) {
  const NetworkSpec net = with_uniform_channels(spec, channels);
  const auto field = convergence_field_l2(net, {dist}, x);
  const int L = analysed_layer_count(net);
  BoundReport base = L == 2 ? variance_bound_two_layer(moments(dist).K1, channels, delta)
                            : variance_bound_multilayer(net, {dist}, x, delta);
  const auto outputs = mc_outputs(net, dist, x, channels, trials, seed, threads);
  std::vector<BoundReport> reports;
  reports.reserve(outputs.size());
  for (std::size_t t = 0; t < outputs.size(); ++t) {
    BoundReport r = base;
    r.trial = static_cast<int>(t);
    r.empirical = sin_angle(outputs[t].data(), field.f_star);
    r.holds = r.empirical <= r.bound;
    reports.push_back(std::move(r));
  }
  return reports;
}

// ---- CSV -----------------------------------------------------------------------------

void write_field_csv(std::ostream& out, const ConvergenceField& field) {
  CsvWriter csv(out);
  csv.header({"pixel", "row", "col", "z_star", "f_star"});
  for (std::size_t i = 0; i < field.f_star.size(); ++i) {
    csv.field(i)
        .field(static_cast<int>(i / static_cast<std::size_t>(field.width)))
        .field(static_cast<int>(i % static_cast<std::size_t>(field.width)))
        .field(field.z_star[i])
        .field(field.f_star[i]);
    csv.end_row();
  }
}

void write_reports_csv(std::ostream& out, const std::vector<BoundReport>& reports) {
  CsvWriter csv(out);
  csv.header({"trial", "kind", "layers", "delta", "channels", "inv_n_bar", "lambda_product",
              "energy", "eps_dot_x", "bound", "empirical", "holds"});
  for (const auto& r : reports) {
    std::string channels;
    for (std::size_t i = 0; i < r.channels.size(); ++i) {
      if (i) channels += ';';
      channels += std::to_string(r.channels[i]);
    }
    double lambda_product = 1.0;
    for (double l : r.lambdas) lambda_product *= l;
    csv.field(r.trial)
        .field(r.kind)
        .field(r.layers)
        .field(r.delta)
        .field(channels.empty() ? std::string("-") : channels)
        .field(r.inv_n_bar)
        .field(lambda_product)
        .field(r.energy)
        .field(r.eps_dot_x)
        .field(r.bound)
        .field(r.empirical)
        .field(r.holds);
    csv.end_row();
  }
}

}  // namespace rcd
