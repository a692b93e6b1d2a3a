#include "efcn/ds_layer.hpp"

#include <atomic>
#include <cmath>
#include <numeric>
#include <string>

#include "efcn/error.hpp"

namespace efcn {

namespace {

std::atomic<std::uint64_t> g_degenerate{0};

double sigmoid(double v) {
  if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

void check_finite(std::span<const double> values, const char* name) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i]))
      fail(ErrorKind::TrainingDivergence,
           std::string("non-finite DS-layer parameter ") + name + "[" + std::to_string(i) + "]");
  }
}

}  // namespace

PrototypeBank PrototypeBank::zeros(std::size_t n, std::size_t p, std::size_t m) {
  PrototypeBank b;
  b.count = n;
  b.features = p;
  b.classes = m;
  b.prototypes.assign(n * p, 0.0);
  b.eta.assign(n, 0.0);
  b.xi.assign(n, 0.0);
  b.delta.assign(n * m, 0.0);
  return b;
}

PrototypeBank PrototypeBank::random(std::size_t n, std::size_t p, std::size_t m, std::mt19937_64& rng) {
  if (n == 0 || p == 0 || m < 2) fail(ErrorKind::InvalidArgument, "prototype bank needs n >= 1, P >= 1, M >= 2");
  PrototypeBank b = zeros(n, p, m);
  std::normal_distribution<double> proto(0.0, 1.0 / std::sqrt(static_cast<double>(p)));
  std::normal_distribution<double> unit(0.0, 1.0);
  // Small scales keep s_l away from zero for unit-scale features; with a
  // large eta, pixels far from every prototype get vacuous masses and no
  // gradient, and training stalls on the majority class.
  std::normal_distribution<double> scale(0.1, 0.02);
  std::normal_distribution<double> logit(0.0, 0.5);
  for (double& v : b.prototypes) v = proto(rng);
  for (std::size_t l = 0; l < n; ++l) {
    b.eta[l] = scale(rng);
    b.xi[l] = logit(rng);
    double sq = 0.0;
    do {
      sq = 0.0;
      for (std::size_t j = 0; j < m; ++j) {
        const double d = unit(rng);
        b.delta[l * m + j] = d;
        sq += d * d;
      }
    } while (sq < 1e-6);
  }
  return b;
}

double PrototypeBank::alpha(std::size_t l) const { return sigmoid(xi[l]); }

void PrototypeBank::memberships(std::size_t l, std::span<double> out) const {
  const double* d = delta.data() + l * classes;
  double sq = 0.0;
  for (std::size_t j = 0; j < classes; ++j) sq += d[j] * d[j];
  if (!(sq > 0.0)) fail(ErrorKind::ContractViolation, "prototype " + std::to_string(l) + " has all-zero memberships");
  for (std::size_t j = 0; j < classes; ++j) out[j] = d[j] * d[j] / sq;
}

std::array<std::span<double>, 4> PrototypeBank::views() {
  return {std::span<double>(prototypes), std::span<double>(eta), std::span<double>(xi), std::span<double>(delta)};
}

std::array<std::span<const double>, 4> PrototypeBank::views() const {
  return {std::span<const double>(prototypes), std::span<const double>(eta), std::span<const double>(xi),
          std::span<const double>(delta)};
}

void validate_bank(const PrototypeBank& bank) {
  if (bank.prototypes.size() != bank.count * bank.features || bank.eta.size() != bank.count ||
      bank.xi.size() != bank.count || bank.delta.size() != bank.count * bank.classes)
    fail(ErrorKind::Dimension, "prototype bank arrays do not match (n, P, M)");
  check_finite(bank.prototypes, "prototypes");
  check_finite(bank.eta, "eta");
  check_finite(bank.xi, "xi");
  check_finite(bank.delta, "delta");
}

MassVector DsForwardTrace::prototype_mass(std::size_t l) const {
  const double* row = prototype_masses.data() + l * (classes + 1);
  return {std::vector<double>(row, row + classes), row[classes]};
}

MassVector DsForwardTrace::unnormalized_total() const {
  const double* row = partial.data() + count() * (classes + 1);
  return {std::vector<double>(row, row + classes), row[classes]};
}

std::uint64_t ds_degenerate_count() { return g_degenerate.load(); }

void ds_forward_into(std::span<const double> x, const PrototypeBank& bank, DsForwardTrace& trace,
                     std::span<double> out) {
  const std::size_t n = bank.count;
  const std::size_t p = bank.features;
  const std::size_t m = bank.classes;
  const std::size_t w = m + 1;
  if (x.size() != p) fail(ErrorKind::Dimension, "ds_forward: feature vector length does not match P");
  if (out.size() != w) fail(ErrorKind::Dimension, "ds_forward: output must have M+1 entries");

  trace.classes = m;
  trace.distances.resize(n);
  trace.similarities.resize(n);
  trace.memberships.resize(n * m);
  trace.prototype_masses.resize(n * w);
  trace.partial.resize((n + 1) * w);

  double* mu = trace.partial.data();
  for (std::size_t j = 0; j < m; ++j) mu[j] = 0.0;
  mu[m] = 1.0;

  for (std::size_t l = 0; l < n; ++l) {
    const double* proto = bank.prototypes.data() + l * p;
    double d2 = 0.0;
    for (std::size_t k = 0; k < p; ++k) {
      const double diff = x[k] - proto[k];
      d2 += diff * diff;
    }
    const double d = std::sqrt(d2);
    const double scaled = bank.eta[l] * d;
    const double s = bank.alpha(l) * std::exp(-scaled * scaled);
    trace.distances[l] = d;
    trace.similarities[l] = s;

    std::span<double> v(trace.memberships.data() + l * m, m);
    bank.memberships(l, v);
    double* ml = trace.prototype_masses.data() + l * w;
    for (std::size_t j = 0; j < m; ++j) ml[j] = v[j] * s;
    ml[m] = 1.0 - s;

    const double* prev = trace.partial.data() + l * w;
    double* next = trace.partial.data() + (l + 1) * w;
    for (std::size_t j = 0; j < m; ++j) next[j] = prev[j] * (ml[j] + ml[m]) + prev[m] * ml[j];
    next[m] = prev[m] * ml[m];
  }

  const double* last = trace.partial.data() + n * w;
  double total = 0.0;
  for (std::size_t c = 0; c < w; ++c) total += last[c];
  trace.total = total;
  trace.degenerate = !(total > 0.0);
  if (trace.degenerate) {
    g_degenerate.fetch_add(1, std::memory_order_relaxed);
    for (std::size_t j = 0; j < m; ++j) out[j] = 0.0;
    out[m] = 1.0;
    return;
  }
  for (std::size_t c = 0; c < w; ++c) out[c] = last[c] / total;
}

std::pair<MassVector, DsForwardTrace> ds_forward(std::span<const double> x, const PrototypeBank& bank) {
  validate_bank(bank);
  if (bank.count == 0) fail(ErrorKind::InvalidArgument, "ds_forward: no prototypes");
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (!std::isfinite(x[k])) fail(ErrorKind::TrainingDivergence, "ds_forward: non-finite input x[" + std::to_string(k) + "]");
  }
  DsForwardTrace trace;
  std::vector<double> out(bank.classes + 1);
  ds_forward_into(x, bank, trace, out);
  MassVector mass{std::vector<double>(out.begin(), out.end() - 1), out.back()};
  return {std::move(mass), std::move(trace)};
}

void ds_backward_accumulate(std::span<const double> grad_out, const DsForwardTrace& trace,
                            std::span<const double> x, const PrototypeBank& bank, PrototypeBank& grad_bank,
                            std::span<double> grad_x) {
  const std::size_t n = bank.count;
  const std::size_t p = bank.features;
  const std::size_t m = bank.classes;
  const std::size_t w = m + 1;
  if (trace.count() != n || trace.classes != m || grad_out.size() != w || x.size() != p || grad_x.size() != p ||
      !grad_bank.same_shape(bank))
    fail(ErrorKind::ContractViolation, "ds_backward: trace or buffers do not match the prototype bank");
  if (trace.degenerate) return;

  // Through the final normalization m = mu^n / Z.
  const double* last = trace.partial.data() + n * w;
  double weighted = 0.0;
  for (std::size_t c = 0; c < w; ++c) weighted += grad_out[c] * last[c];
  weighted /= trace.total;
  std::vector<double> g_mu(w);
  for (std::size_t c = 0; c < w; ++c) g_mu[c] = (grad_out[c] - weighted) / trace.total;

  std::vector<double> g_mass(w);
  std::vector<double> g_prev(w);
  std::vector<double> g_v(m);
  for (std::size_t l = n; l-- > 0;) {
    const double* prev = trace.partial.data() + l * w;
    const double* ml = trace.prototype_masses.data() + l * w;

    double g_omega = g_mu[m] * prev[m];
    double g_prev_omega = g_mu[m] * ml[m];
    for (std::size_t j = 0; j < m; ++j) {
      g_mass[j] = g_mu[j] * (prev[j] + prev[m]);
      g_omega += g_mu[j] * prev[j];
      g_prev[j] = g_mu[j] * (ml[j] + ml[m]);
      g_prev_omega += g_mu[j] * ml[j];
    }
    g_mass[m] = g_omega;
    g_prev[m] = g_prev_omega;

    const double s = trace.similarities[l];
    const double* v = trace.memberships.data() + l * m;
    double g_s = -g_mass[m];
    for (std::size_t j = 0; j < m; ++j) g_s += g_mass[j] * v[j];

    // Memberships: v_j = delta_j^2 / S.
    const double* delta = bank.delta.data() + l * m;
    double sq = 0.0;
    double gv_dot_v = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      sq += delta[j] * delta[j];
      g_v[j] = g_mass[j] * s;
      gv_dot_v += g_v[j] * v[j];
    }
    for (std::size_t j = 0; j < m; ++j) grad_bank.delta[l * m + j] += 2.0 * delta[j] / sq * (g_v[j] - gv_dot_v);

    // s = alpha * exp(-(eta d)^2).
    const double alpha = bank.alpha(l);
    const double d = trace.distances[l];
    const double eta = bank.eta[l];
    const double decay = std::exp(-(eta * d) * (eta * d));
    grad_bank.xi[l] += g_s * decay * alpha * (1.0 - alpha);
    grad_bank.eta[l] += g_s * s * (-2.0 * eta * d * d);
    const double coef = g_s * s * (-2.0 * eta * eta);
    const double* proto = bank.prototypes.data() + l * p;
    double* g_proto = grad_bank.prototypes.data() + l * p;
    for (std::size_t k = 0; k < p; ++k) {
      const double t = coef * (x[k] - proto[k]);
      grad_x[k] += t;
      g_proto[k] -= t;
    }

    g_mu.swap(g_prev);
  }
}

DsGradient ds_backward(std::span<const double> grad_out, const DsForwardTrace& trace, std::span<const double> x,
                       const PrototypeBank& bank) {
  DsGradient g{PrototypeBank::zeros(bank.count, bank.features, bank.classes), std::vector<double>(x.size(), 0.0)};
  ds_backward_accumulate(grad_out, trace, x, bank, g.bank, g.x);
  return g;
}

Tensor ds_forward_map(const Tensor& features, const PrototypeBank& bank) {
  if (features.rank() != 3 || features.channels() != bank.features)
    fail(ErrorKind::Dimension, "ds_forward_map: expected an H x W x P feature map");
  validate_bank(bank);
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (!std::isfinite(features.data()[i]))
      fail(ErrorKind::TrainingDivergence, "ds_forward_map: non-finite feature at flat index " + std::to_string(i));
  }
  Tensor out = Tensor::hwc(features.height(), features.width(), bank.classes + 1);
  DsForwardTrace trace;
  for (std::size_t y = 0; y < features.height(); ++y) {
    for (std::size_t x = 0; x < features.width(); ++x) ds_forward_into(features.pixel(y, x), bank, trace, out.pixel(y, x));
  }
  return out;
}

}  // namespace efcn
