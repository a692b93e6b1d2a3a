#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "efcn/belief.hpp"
#include "efcn/data.hpp"
#include "efcn/model.hpp"
#include "efcn/utility.hpp"

namespace efcn {

// Expected utilities of every act under the logical mass on `label`.
struct SoftTarget {
  ClassSet label;
  std::vector<double> labeling_eu;
};

SoftTarget make_soft_target(ClassSet label, const UtilityTable& table);

// Labeling utilities and per-act realized utilities, built once per label.
class TargetCache {
 public:
  explicit TargetCache(const UtilityTable& table);

  const SoftTarget& target(ClassSet label);
  // Utility of each act of the table under `label`.
  const std::vector<double>& realized(ClassSet label);
  const UtilityTable& table() const { return table_; }
  const std::vector<double>& row_means() const { return row_means_; }

 private:
  const UtilityTable& table_;
  std::vector<double> row_means_;
  std::map<ClassSet, SoftTarget> targets_;
  std::map<ClassSet, std::vector<double>> realized_;
};

// Sum over the table's acts of squared expected-utility gaps.
double loss(const MassVector& m, const SoftTarget& target, const UtilityTable& table);

// dL/dm({w_k}) for k = 1..M with m(Omega) = 1 - sum_k m({w_k}).
std::vector<double> loss_grad_masses(const MassVector& m, const SoftTarget& target, const UtilityTable& table);

// Fused per-pixel form on a packed (M+1) mass vector. Writes the singleton
// gradients and a zero Omega entry into grad_out; returns the loss.
double pixel_loss_and_grad(std::span<const double> masses, const SoftTarget& target, const TargetCache& cache,
                           std::span<double> grad_out);

enum class Optimizer { Sgd, SgdMomentum };

struct TrainConfig {
  double learning_rate = 0.1;
  std::size_t epochs = 30;
  std::size_t batch_size = 8;
  double gamma = 0.8;
  std::uint64_t seed = 0;
  Optimizer optimizer = Optimizer::SgdMomentum;
  double momentum = 0.9;
};

struct EpochStats {
  std::size_t epoch = 0;
  double loss = 0.0;
  double pu = 0.0;
};

using TrainHistory = std::vector<EpochStats>;

struct SampleTotals {
  double loss = 0.0;
  double utility = 0.0;
  std::size_t pixels = 0;
};

// Loss and pixel-utility sums over the labelled pixels of one sample; adds
// the gradient of the loss sum into `grad` when it is non-null.
SampleTotals accumulate_sample(const Model& model, const SegSample& sample, TargetCache& cache, ModelGrad* grad);

// Mean per-pixel loss over a set of samples.
double mean_loss(const Model& model, const SegDataset& ds, std::span<const std::size_t> indices,
                 const UtilityTable& table);

using EpochCallback = std::function<void(const EpochStats&)>;

// Mini-batch gradient descent on every backbone and DS-layer parameter. The
// batch loss is the mean over labelled pixels in the batch.
TrainHistory train(Model& model, const SegDataset& ds, const TrainConfig& cfg, const UtilityTable& table,
                   const EpochCallback& on_epoch = {});

struct GradCheckEntry {
  std::string parameter;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct GradCheckReport {
  std::size_t checked = 0;
  std::size_t skipped_kinks = 0;
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::vector<GradCheckEntry> entries;
};

struct GradCheckOptions {
  std::size_t parameters = 200;
  double step = 1e-5;
  std::uint64_t seed = 0;
  // Standard deviation of the noise added to the image before checking, so
  // pooling and ReLU ties are broken. Zero disables jitter.
  double jitter = 1e-3;
};

// Central differences of the mean sample loss against backpropagation on a
// random subset of parameters drawn across all arrays. Relative error is
// |a - n| / max(|a|, |n|, 1e-6).
GradCheckReport grad_check(Model& model, const SegSample& sample, const UtilityTable& table,
                           const GradCheckOptions& options = {});

}  // namespace efcn
