#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "rcd/network.hpp"
#include "rcd/random_weights.hpp"
#include "rcd/tensor.hpp"

namespace rcd {

/// Filter distribution per conv layer of a network; a single entry applies
/// to every conv layer.
using LayerDistributions = std::vector<DistributionSpec>;

/// Infinite-width limit of a def51 network's output.
struct ConvergenceField {
  /// Pixel norms ||X^(i)_{:,p}|| in the limit, one vector per analysed layer
  /// (input first; relu and crop layers are folded into their neighbours).
  std::vector<std::vector<double>> layer_norms;
  /// z*: with l2 pooling, z*_i = sqrt(sum_l n_(l,i) ||X_{:,l}||^2). With
  /// average pooling it is the final receptive-field norm z^(L-2).
  std::vector<double> z_star;
  /// f* = k * z*.
  double k = 0.0;
  std::vector<double> f_star;
  int height = 0;
  int width = 0;
};

/// Number of routes from each input pixel (single channel) to each output
/// pixel. counts is out_pixels x in_pixels, row-major; entries are integers.
struct RouteCountMap {
  int in_pixels = 0;
  int out_pixels = 0;
  std::vector<double> counts;

  double at(int out, int in) const {
    return counts[static_cast<std::size_t>(out) * in_pixels + in];
  }
  /// Receptive set R_i: input pixels with a positive route count.
  std::vector<int> receptive_set(int out) const;
};

/// Pixel Gram matrices C^(i)_jk = <X_{:,j}, X_{:,k}> in the limit.
struct GramField {
  std::vector<std::vector<double>> gram_per_layer;  // each d_i x d_i row-major
  std::vector<int> pixels_per_layer;
};

/// A bound together with everything needed to recompute it.
struct BoundReport {
  std::string kind;          // "two_layer", "multilayer" or "cosine"
  double bound = 0.0;
  double empirical = 0.0;    // sin(Theta) for variance bounds, cos(Phi) for cosine
  bool holds = true;
  int trial = -1;

  // Variance-bound parameters.
  int layers = 0;                  // L
  double delta = 0.0;
  std::vector<int> channels;       // N_1 .. N_{L-1}
  std::vector<double> relative_variances;  // K of each 1/N-bar term, in order
  double inv_n_bar = 0.0;          // 1 / N-bar
  std::vector<double> lambdas;     // lambda_0 .. lambda_{L-2}

  // Cosine-bound parameters.
  double energy = 0.0;             // M = sum_t X_t^2
  double eps_dot_x = 0.0;          // sum_t eps_t X_t

  bool vacuous() const { return bound > 1.0; }
  /// Recomputes `bound` from the stored parameters only.
  double recompute() const;
};

ConvergenceField convergence_field_l2(const NetworkSpec& spec, const LayerDistributions& dists,
                                      const FeatureMaps& x);

RouteCountMap compute_route_counts(const NetworkSpec& spec);

struct AvgConvergence {
  GramField gram;
  ConvergenceField field;
};

AvgConvergence convergence_field_avg(const NetworkSpec& spec, const LayerDistributions& dists,
                                     const FeatureMaps& x);

/// sqrt(K1 / (N delta)); values above 1 are vacuous but still returned.
BoundReport variance_bound_two_layer(double K1, int N, double delta);

/// Disjoint, equal-size index groups covering [0, n).
using Partition = std::vector<std::vector<int>>;

/// Windows of a partitioning patch index; throws AssumptionError when the
/// windows overlap, contain padding or leave pixels uncovered.
Partition partition_from_patches(const PatchIndex& p);
Partition single_group(int n);

/// Per-group mean removal: eps(x)_j = x_j - mean of j's group.
std::vector<double> epsilon_operator(const std::vector<double>& x, const Partition& groups);

/// Multilayer bound for an l2-pooled, single-route def51 network. Channel
/// counts N_i are the conv widths of `spec`.
BoundReport variance_bound_multilayer(const NetworkSpec& spec, const LayerDistributions& dists,
                                      const FeatureMaps& x, double delta);

/// Lower bound on cos(Phi) between a positive single-channel image and its
/// convergence value. Without `spec` the network is the two-layer
/// conv(r, stride 1, same padding) + mean; with `spec` (stride-1, same-size
/// def51 network) the patch mean becomes the route-weighted mean.
BoundReport cosine_bound(const FeatureMaps& x, int kernel,
                         const std::optional<NetworkSpec>& spec = std::nullopt);

/// The two-layer def51 network conv(kernel, 1, kernel/2, channels) + relu + mean.
NetworkSpec two_layer_net(Dims input, int kernel, int channels);

/// sin of the angle between two vectors; 1 when either is zero.
double sin_angle(std::span<const double> a, std::span<const double> b);
double cos_angle(std::span<const double> a, std::span<const double> b);

/// Outputs of `trials` independent def51 networks whose conv layers all have
/// `channels` filters. Trial t samples its bank from substream (seed, t).
std::vector<FeatureMaps> mc_outputs(const NetworkSpec& spec, const DistributionSpec& dist,
                                    const FeatureMaps& x, int channels, int trials,
                                    std::uint64_t seed, unsigned threads = 0);

/// Per-trial sin(Theta) against the l2 convergence value and the variance
/// bound (two-layer form when L = 2, multilayer form otherwise).
std::vector<BoundReport> mc_verify(const NetworkSpec& spec, const DistributionSpec& dist,
                                   const FeatureMaps& x, int channels, int trials, double delta,
                                   std::uint64_t seed, unsigned threads = 0);

/// Number of analysed layers L of a def51 network (conv, pool, upsample and
/// the final mean each count once).
int analysed_layer_count(const NetworkSpec& spec);

void write_field_csv(std::ostream& out, const ConvergenceField& field);
void write_reports_csv(std::ostream& out, const std::vector<BoundReport>& reports);

}  // namespace rcd
