#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "rcd/network.hpp"
#include "rcd/tensor.hpp"

namespace rcd {

struct TrainConfig {
  double lr0 = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double weight_decay = 4e-4;
  bool decoupled_decay = false;  // default adds weight_decay * w to the gradient
  int batch_size = 32;
  std::vector<int> milestones;   // empty: 50% and 75% of max_iters
  double decay_factor = 0.5;
  int max_iters = 1000;
  int checkpoint_every = 0;      // 0: max_iters / 10
  std::uint64_t seed = 0;
  unsigned threads = 0;

  void validate() const;
  std::vector<int> resolved_milestones() const;
  double lr_at(int iter) const;
};

/// Decoder filters plus Adam state.
struct DcnParams {
  std::vector<FilterLayer> filters;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::int64_t step = 0;

  std::vector<FilterShape> shapes() const;
  friend bool operator==(const DcnParams&, const DcnParams&) = default;
};

using Gradients = std::vector<std::vector<double>>;

/// Gaussian filters with variance 2 / ((1 + slope^2) fan_in), fan_in being
/// the filter length; optimizer state zeroed.
DcnParams msra_init(const std::vector<FilterShape>& shapes, double slope, std::uint64_t seed);

/// Sum of squared differences.
double loss_l2(const FeatureMaps& output, const FeatureMaps& target);

/// Forward pass that keeps every intermediate (input first).
struct DcnCache {
  std::vector<FeatureMaps> activations;  // layers.size() + 1 entries
  const FeatureMaps& output() const { return activations.back(); }
};

DcnCache dcn_forward(const NetworkSpec& dcn, const DcnParams& params, const FeatureMaps& x);

/// Reverse-mode gradient of a scalar loss with respect to every decoder
/// filter, given dLoss/dOutput. Max and l2 pooling are not differentiable
/// here and raise VariantError.
Gradients backward(const NetworkSpec& dcn, const DcnParams& params, const DcnCache& cache,
                   const FeatureMaps& loss_grad);

/// Loss and gradient of loss_l2(dcn(x), target).
double loss_and_gradient(const NetworkSpec& dcn, const DcnParams& params, const FeatureMaps& x,
                         const FeatureMaps& target, Gradients* grads);

/// One bias-corrected Adam update at learning rate `lr`.
void adam_step(DcnParams& params, const Gradients& grads, const TrainConfig& config, double lr);

struct LossRecord {
  int iter = 0;
  double lr = 0.0;
  double loss = 0.0;  // summed over the whole dataset
};

struct TrainResult {
  DcnParams params;
  std::vector<LossRecord> history;
};

/// Trains `dcn` to map the fixed encoder's representation of each image back
/// to the image. Batches cycle through a per-epoch permutation drawn from
/// config.seed; the loss is recorded before training and every
/// checkpoint_every iterations.
TrainResult train_dcn(const NetworkSpec& cnn, const FilterBank& cnn_bank, const NetworkSpec& dcn,
                      const std::vector<FeatureMaps>& dataset, const TrainConfig& config,
                      const DcnParams* init = nullptr);

/// Decoder input for every image: the encoder's output.
std::vector<FeatureMaps> encode_all(const NetworkSpec& cnn, const FilterBank& bank,
                                    const std::vector<FeatureMaps>& images, unsigned threads = 0);

void write_checkpoint(std::ostream& out, const DcnParams& params);
DcnParams read_checkpoint(std::istream& in);
void save_checkpoint(const std::filesystem::path& path, const DcnParams& params);
DcnParams load_checkpoint(const std::filesystem::path& path);

void write_loss_csv(std::ostream& out, const std::vector<LossRecord>& history);

}  // namespace rcd
