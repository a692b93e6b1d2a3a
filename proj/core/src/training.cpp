#include "efcn/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "efcn/error.hpp"

namespace efcn {

SoftTarget make_soft_target(ClassSet label, const UtilityTable& table) {
  if (label.empty() || !label.is_subset_of(ClassSet::full(table.classes())))
    fail(ErrorKind::InvalidLabel, "soft target needs a non-empty label within the frame");
  const PignisticDist betp = pignistic(logical_mass(label), table.classes());
  return SoftTarget{label, expected_utilities(betp, table).values};
}

TargetCache::TargetCache(const UtilityTable& table) : table_(table) {
  const Matrix& ext = table.extended();
  row_means_.resize(ext.rows);
  for (std::size_t a = 0; a < ext.rows; ++a) {
    const auto row = ext.row(a);
    row_means_[a] = std::accumulate(row.begin(), row.end(), 0.0) / static_cast<double>(ext.cols);
  }
}

const SoftTarget& TargetCache::target(ClassSet label) {
  auto it = targets_.find(label);
  if (it == targets_.end()) it = targets_.emplace(label, make_soft_target(label, table_)).first;
  return it->second;
}

const std::vector<double>& TargetCache::realized(ClassSet label) {
  auto it = realized_.find(label);
  if (it == realized_.end()) {
    std::vector<double> u(table_.acts().size());
    for (std::size_t a = 0; a < u.size(); ++a) u[a] = table_.utility(table_.acts()[a], label);
    it = realized_.emplace(label, std::move(u)).first;
  }
  return it->second;
}

namespace {

void check_target(const SoftTarget& target, const UtilityTable& table, std::size_t classes) {
  if (target.labeling_eu.size() != table.acts().size())
    fail(ErrorKind::ContractViolation, "soft target was built for a different act list");
  if (classes != table.classes()) fail(ErrorKind::ContractViolation, "mass vector and utility table differ in class count");
}

}  // namespace

double pixel_loss_and_grad(std::span<const double> masses, const SoftTarget& target, const TargetCache& cache,
                           std::span<double> grad_out) {
  const Matrix& ext = cache.table().extended();
  const std::size_t m = ext.cols;
  const double share = masses[m] / static_cast<double>(m);
  double l = 0.0;
  std::fill(grad_out.begin(), grad_out.end(), 0.0);
  const auto& means = cache.row_means();
  for (std::size_t a = 0; a < ext.rows; ++a) {
    const double* row = ext.data.data() + a * m;
    double e = 0.0;
    for (std::size_t j = 0; j < m; ++j) e += row[j] * (masses[j] + share);
    const double gap = target.labeling_eu[a] - e;
    l += gap * gap;
    for (std::size_t k = 0; k < m; ++k) grad_out[k] += -2.0 * gap * (row[k] - means[a]);
  }
  return l;
}

double loss(const MassVector& m, const SoftTarget& target, const UtilityTable& table) {
  check_target(target, table, m.classes());
  const ExpectedUtilities eu = expected_utilities(pignistic(m), table);
  double l = 0.0;
  for (std::size_t a = 0; a < eu.values.size(); ++a) {
    const double gap = target.labeling_eu[a] - eu.values[a];
    l += gap * gap;
  }
  return l;
}

std::vector<double> loss_grad_masses(const MassVector& m, const SoftTarget& target, const UtilityTable& table) {
  check_target(target, table, m.classes());
  const ExpectedUtilities eu = expected_utilities(pignistic(m), table);
  const Matrix& ext = table.extended();
  const double inv_m = 1.0 / static_cast<double>(m.classes());
  std::vector<double> g(m.classes(), 0.0);
  for (std::size_t a = 0; a < ext.rows; ++a) {
    const double gap = target.labeling_eu[a] - eu.values[a];
    for (std::size_t k = 0; k < m.classes(); ++k) {
      double chain = 0.0;
      for (std::size_t j = 0; j < m.classes(); ++j) chain += ext(a, j) * ((k == j ? 1.0 : 0.0) - inv_m);
      g[k] += -2.0 * gap * chain;
    }
  }
  return g;
}

SampleTotals accumulate_sample(const Model& model, const SegSample& sample, TargetCache& cache, ModelGrad* grad) {
  const UtilityTable& table = cache.table();
  const std::size_t m = model.frame.size();
  if (table.classes() != m) fail(ErrorKind::ContractViolation, "utility table and model frame differ");

  BackboneTrace trace;
  const Tensor features = model.backbone.forward(sample.image, grad ? &trace : nullptr);
  if (features.height() != sample.labels.height || features.width() != sample.labels.width)
    fail(ErrorKind::Dimension, "backbone output does not cover the label map");

  Tensor grad_features;
  if (grad) grad_features = Tensor(features.dims(), 0.0);

  DsForwardTrace ds;
  std::vector<double> masses(m + 1);
  std::vector<double> betp(m);
  std::vector<double> eu(table.acts().size());
  std::vector<double> g_mass(m + 1);
  SampleTotals totals;
  for (std::size_t y = 0; y < features.height(); ++y) {
    for (std::size_t x = 0; x < features.width(); ++x) {
      const ClassSet label = sample.labels.at(y, x);
      if (label.empty()) continue;
      const auto feat = features.pixel(y, x);
      ds_forward_into(feat, model.bank, ds, masses);
      const SoftTarget& target = cache.target(label);
      const double l = pixel_loss_and_grad(masses, target, cache, g_mass);
      totals.loss += l;
      ++totals.pixels;

      for (std::size_t j = 0; j < m; ++j) betp[j] = masses[j] + masses[m] / static_cast<double>(m);
      expected_utilities_into(betp, table.extended(), eu);
      totals.utility += cache.realized(label)[select_act_index(eu, table.acts())];

      if (grad) ds_backward_accumulate(g_mass, ds, feat, model.bank, grad->bank, grad_features.pixel(y, x));
    }
  }
  if (grad) model.backbone.backward(sample.image, grad_features, trace, grad->layers);
  return totals;
}

double mean_loss(const Model& model, const SegDataset& ds, std::span<const std::size_t> indices,
                 const UtilityTable& table) {
  TargetCache cache(table);
  double l = 0.0;
  std::size_t pixels = 0;
  for (std::size_t i : indices) {
    const SampleTotals t = accumulate_sample(model, ds.samples.at(i), cache, nullptr);
    l += t.loss;
    pixels += t.pixels;
  }
  return pixels ? l / static_cast<double>(pixels) : 0.0;
}

namespace {

std::vector<std::string> parameter_names(const Model& model) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < model.backbone.params().size(); ++i) {
    names.push_back("layer" + std::to_string(i) + ".weights");
    names.push_back("layer" + std::to_string(i) + ".bias");
  }
  for (const char* n : {"bank.prototypes", "bank.eta", "bank.xi", "bank.delta"}) names.emplace_back(n);
  return names;
}

}  // namespace

TrainHistory train(Model& model, const SegDataset& ds, const TrainConfig& cfg, const UtilityTable& table,
                   const EpochCallback& on_epoch) {
  if (ds.train.empty()) fail(ErrorKind::InvalidArgument, "training split is empty");
  if (cfg.batch_size == 0) fail(ErrorKind::InvalidArgument, "batch size must be positive");
  if (!(cfg.learning_rate >= 0.0)) fail(ErrorKind::InvalidArgument, "learning rate must be non-negative");
  if (table.acts() != model.acts) fail(ErrorKind::ContractViolation, "utility table acts differ from the model's act list");

  std::mt19937_64 rng(cfg.seed);
  TargetCache cache(table);
  ModelGrad grad = ModelGrad::zeros_like(model);
  ModelGrad velocity = ModelGrad::zeros_like(model);
  std::vector<std::size_t> order = ds.train;
  const auto names = parameter_names(model);
  TrainHistory history;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    SampleTotals epoch_totals;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++batch_index) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      grad.clear();
      SampleTotals batch;
      for (std::size_t k = start; k < stop; ++k) {
        const SampleTotals t = accumulate_sample(model, ds.samples[order[k]], cache, &grad);
        batch.loss += t.loss;
        batch.utility += t.utility;
        batch.pixels += t.pixels;
      }
      if (!std::isfinite(batch.loss))
        fail(ErrorKind::TrainingDivergence,
             "non-finite loss at epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch_index));
      epoch_totals.loss += batch.loss;
      epoch_totals.utility += batch.utility;
      epoch_totals.pixels += batch.pixels;
      if (batch.pixels == 0) continue;

      const double scale = 1.0 / static_cast<double>(batch.pixels);
      auto params = model.parameter_views();
      auto grads = grad.views();
      auto vel = velocity.views();
      for (std::size_t a = 0; a < params.size(); ++a) {
        for (std::size_t i = 0; i < params[a].size(); ++i) {
          const double g = grads[a][i] * scale;
          if (cfg.optimizer == Optimizer::SgdMomentum) {
            vel[a][i] = cfg.momentum * vel[a][i] - cfg.learning_rate * g;
            params[a][i] += vel[a][i];
          } else {
            params[a][i] -= cfg.learning_rate * g;
          }
        }
      }
      // A NaN weight behind a ReLU never reaches the loss, so check the
      // parameters themselves.
      for (std::size_t a = 0; a < params.size(); ++a) {
        for (std::size_t i = 0; i < params[a].size(); ++i) {
          if (!std::isfinite(params[a][i]))
            fail(ErrorKind::TrainingDivergence, "non-finite parameter " + names[a] + "[" + std::to_string(i) +
                                                    "] at epoch " + std::to_string(epoch) + ", batch " +
                                                    std::to_string(batch_index));
        }
      }
    }
    const double denom = epoch_totals.pixels ? static_cast<double>(epoch_totals.pixels) : 1.0;
    EpochStats stats{epoch, epoch_totals.loss / denom, epoch_totals.utility / denom};
    history.push_back(stats);
    if (on_epoch) on_epoch(stats);
  }
  validate_bank(model.bank);
  return history;
}

namespace {

double sample_mean_loss(const Model& model, const SegSample& sample, TargetCache& cache) {
  const SampleTotals t = accumulate_sample(model, sample, cache, nullptr);
  return t.pixels ? t.loss / static_cast<double>(t.pixels) : 0.0;
}

}  // namespace

GradCheckReport grad_check(Model& model, const SegSample& sample, const UtilityTable& table,
                           const GradCheckOptions& options) {
  std::mt19937_64 rng(options.seed);
  SegSample jittered = sample;
  if (options.jitter > 0.0) {
    std::normal_distribution<double> noise(0.0, options.jitter);
    for (double& v : jittered.image.data()) v += noise(rng);
  }

  TargetCache cache(table);
  ModelGrad grad = ModelGrad::zeros_like(model);
  const SampleTotals totals = accumulate_sample(model, jittered, cache, &grad);
  const double scale = totals.pixels ? 1.0 / static_cast<double>(totals.pixels) : 0.0;

  auto params = model.parameter_views();
  auto grads = grad.views();
  const auto names = parameter_names(model);
  std::vector<std::size_t> arrays;
  for (std::size_t a = 0; a < params.size(); ++a) {
    if (!params[a].empty()) arrays.push_back(a);
  }

  GradCheckReport report;
  const double h = options.step;
  std::size_t attempts = 0;
  while (report.checked < options.parameters && attempts < options.parameters * 4) {
    const std::size_t a = arrays[attempts % arrays.size()];
    ++attempts;
    const std::size_t i = std::uniform_int_distribution<std::size_t>(0, params[a].size() - 1)(rng);
    double& p = params[a][i];
    const double saved = p;
    auto central = [&](double step) {
      p = saved + step;
      const double up = sample_mean_loss(model, jittered, cache);
      p = saved - step;
      const double down = sample_mean_loss(model, jittered, cache);
      p = saved;
      return (up - down) / (2.0 * step);
    };
    const double numeric = central(h);
    const double refined = central(h / 2.0);
    const double analytic = grads[a][i] * scale;
    // A kink between the two steps makes the estimates disagree.
    if (std::abs(numeric - refined) > 1e-2 * std::max({std::abs(numeric), std::abs(refined), 1e-6})) {
      ++report.skipped_kinks;
      continue;
    }
    const double abs_err = std::abs(analytic - numeric);
    const double rel = abs_err / std::max({std::abs(analytic), std::abs(numeric), 1e-6});
    report.entries.push_back({names[a] + "[" + std::to_string(i) + "]", analytic, numeric, rel});
    report.max_rel_error = std::max(report.max_rel_error, rel);
    report.max_abs_error = std::max(report.max_abs_error, abs_err);
    ++report.checked;
  }
  return report;
}

}  // namespace efcn
