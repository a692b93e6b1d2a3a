#include "efcn/utility.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

#include "efcn/error.hpp"

namespace efcn {

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

double tolerance_to_imprecision(std::span<const double> weights) {
  const std::size_t k = weights.size();
  if (k <= 1) return 1.0;
  double t = 0.0;
  for (std::size_t i = 0; i < k; ++i) t += static_cast<double>(k - 1 - i) / static_cast<double>(k - 1) * weights[i];
  return t;
}

double owa_entropy(std::span<const double> weights) {
  double h = 0.0;
  for (double g : weights) {
    if (g > 0.0) h -= g * std::log(g);
  }
  return h;
}

namespace {

std::vector<double> geometric_weights(double ratio, std::size_t k) {
  std::vector<double> g(k);
  double term = 1.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    g[i] = term;
    sum += term;
    term *= ratio;
  }
  for (double& v : g) v /= sum;
  return g;
}

}  // namespace

std::vector<double> solve_owa(double gamma, std::size_t k) {
  if (!(gamma >= 0.5 && gamma <= 1.0))
    fail(ErrorKind::InvalidArgument, "solve_owa: gamma must lie in [0.5, 1], got " + std::to_string(gamma));
  if (k == 0) fail(ErrorKind::InvalidArgument, "solve_owa: cardinality must be positive");
  if (k == 1) return {1.0};
  if (gamma == 1.0) {
    std::vector<double> g(k, 0.0);
    g[0] = 1.0;
    return g;
  }
  if (gamma == 0.5) return std::vector<double>(k, 1.0 / static_cast<double>(k));
  if (k == 2) return {gamma, 1.0 - gamma};

  // Tolerance is strictly decreasing in the ratio: 1 at q = 0, 0.5 at q = 1.
  double lo = 0.0;
  double hi = 1.0;
  for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    if (tolerance_to_imprecision(geometric_weights(mid, k)) > gamma)
      lo = mid;
    else
      hi = mid;
  }
  std::vector<double> g = geometric_weights(0.5 * (lo + hi), k);
  const double residual = std::abs(tolerance_to_imprecision(g) - gamma);
  if (residual > 1e-9)
    fail(ErrorKind::Numeric, "solve_owa: bisection did not converge, residual " + std::to_string(residual));
  return g;
}

OwaWeights OwaWeights::solve(double gamma, std::size_t max_cardinality) {
  OwaWeights w;
  w.gamma = gamma;
  w.by_cardinality.reserve(max_cardinality);
  for (std::size_t k = 1; k <= max_cardinality; ++k) w.by_cardinality.push_back(solve_owa(gamma, k));
  return w;
}

std::vector<double> extend_row(const Matrix& base, ClassSet act, const OwaWeights& owa) {
  if (base.rows != base.cols) fail(ErrorKind::Dimension, "utility matrix must be square");
  if (act.empty() || !act.is_subset_of(ClassSet::full(base.rows)))
    fail(ErrorKind::InvalidLabel, "act is empty or outside the frame");
  const std::size_t m = base.rows;
  const auto weights = owa.for_cardinality(act.size());
  std::vector<double> row(m);
  std::vector<double> column;
  column.reserve(act.size());
  for (std::size_t j = 0; j < m; ++j) {
    column.clear();
    for (std::size_t i = 0; i < m; ++i) {
      if (act.contains(i)) column.push_back(base(i, j));
    }
    std::sort(column.begin(), column.end(), std::greater<>());
    double u = 0.0;
    for (std::size_t k = 0; k < column.size(); ++k) u += weights[k] * column[k];
    row[j] = u;
  }
  return row;
}

Matrix extend_utilities(const Matrix& base, const ActList& acts, const OwaWeights& owa) {
  for (double u : base.data) {
    if (!(u >= 0.0 && u <= 1.0)) fail(ErrorKind::InvalidArgument, "base utilities must lie in [0, 1]");
  }
  Matrix ext(acts.size(), base.cols);
  for (std::size_t a = 0; a < acts.size(); ++a) {
    const auto row = extend_row(base, acts[a], owa);
    std::copy(row.begin(), row.end(), ext.data.begin() + static_cast<std::ptrdiff_t>(a * ext.cols));
  }
  return ext;
}

Matrix soft_label_utilities(const Matrix& extended, const ActList& acts, std::span<const ClassSet> labels) {
  if (extended.rows != acts.size()) fail(ErrorKind::Dimension, "extended matrix rows do not match the act list");
  auto averaged = [&](std::size_t act, ClassSet label) {
    double sum = 0.0;
    for (std::size_t k = 0; k < extended.cols; ++k) {
      if (label.contains(k)) sum += extended(act, k);
    }
    return sum / static_cast<double>(label.size());
  };
  Matrix soft(acts.size(), labels.size());
  for (std::size_t b = 0; b < labels.size(); ++b) {
    const ClassSet label = labels[b];
    if (label.empty()) fail(ErrorKind::InvalidLabel, "empty soft label");
    const auto self = acts.index_of(label);
    if (!self) fail(ErrorKind::InvalidLabel, "soft label is not among the acts");
    const double norm = averaged(*self, label);
    if (!(norm > 0.0)) fail(ErrorKind::InvalidLabel, "soft label has zero self-utility and cannot be normalized");
    for (std::size_t a = 0; a < acts.size(); ++a) soft(a, b) = averaged(a, label) / norm;
  }
  return soft;
}

UtilityTable::UtilityTable(const Matrix& base, ActList acts, double gamma, std::vector<ClassSet> labels)
    : base_(base), acts_(std::move(acts)), labels_(std::move(labels)) {
  if (base_.rows != base_.cols || base_.rows < 2) fail(ErrorKind::Dimension, "base utility matrix must be M x M");
  owa_ = OwaWeights::solve(gamma, base_.rows);
  extended_ = extend_utilities(base_, acts_, owa_);

  // Labels that are not acts still need their own row to normalize against.
  std::vector<ClassSet> augmented = acts_.acts();
  for (ClassSet l : labels_) {
    if (!acts_.index_of(l)) augmented.push_back(l);
  }
  const ActList all(augmented);
  const Matrix soft_all = soft_label_utilities(extend_utilities(base_, all, owa_), all, labels_);
  soft_ = Matrix(acts_.size(), labels_.size());
  for (std::size_t a = 0; a < acts_.size(); ++a) {
    for (std::size_t b = 0; b < labels_.size(); ++b) soft_(a, b) = soft_all(a, b);
  }
}

UtilityTable UtilityTable::identity(const Frame& frame, ActList acts, double gamma, std::vector<ClassSet> labels) {
  return UtilityTable(Matrix::identity(frame.size()), std::move(acts), gamma, std::move(labels));
}

double UtilityTable::utility(ClassSet act, ClassSet label) const {
  const auto a = acts_.index_of(act);
  if (label.size() == 1 && a) return extended_(*a, label.lowest());
  if (a) {
    auto it = std::find(labels_.begin(), labels_.end(), label);
    if (it != labels_.end()) return soft_(*a, static_cast<std::size_t>(it - labels_.begin()));
  }
  const auto row = extend_row(base_, act, owa_);
  if (label.size() == 1) return row[label.lowest()];
  const auto self = extend_row(base_, label, owa_);
  double num = 0.0;
  double den = 0.0;
  for (std::size_t k = 0; k < classes(); ++k) {
    if (!label.contains(k)) continue;
    num += row[k];
    den += self[k];
  }
  if (!(den > 0.0)) fail(ErrorKind::InvalidLabel, "soft label has zero self-utility and cannot be normalized");
  return num / den;
}

void expected_utilities_into(std::span<const double> betp, const Matrix& extended, std::span<double> out) {
  if (betp.size() != extended.cols || out.size() != extended.rows)
    fail(ErrorKind::Dimension, "expected_utilities: shape mismatch");
  for (std::size_t a = 0; a < extended.rows; ++a) {
    const double* row = extended.data.data() + a * extended.cols;
    double e = 0.0;
    for (std::size_t j = 0; j < extended.cols; ++j) e += row[j] * betp[j];
    out[a] = e;
  }
}

ExpectedUtilities expected_utilities(const PignisticDist& betp, const UtilityTable& table) {
  ExpectedUtilities eu;
  eu.values.resize(table.acts().size());
  expected_utilities_into(betp.probs, table.extended(), eu.values);
  return eu;
}

std::size_t select_act_index(std::span<const double> eu, const ActList& acts) {
  if (acts.size() == 0) fail(ErrorKind::ContractViolation, "select_act: empty act list");
  if (eu.size() != acts.size()) fail(ErrorKind::Dimension, "select_act: utilities do not match the act list");
  double best = eu[0];
  for (double v : eu) {
    if (std::isnan(v)) fail(ErrorKind::ContractViolation, "select_act: NaN expected utility");
    best = std::max(best, v);
  }
  std::size_t chosen = acts.size();
  for (std::size_t a = 0; a < acts.size(); ++a) {
    if (eu[a] < best - kTieTolerance) continue;
    if (chosen == acts.size() || CardinalityOrder{}(acts[a], acts[chosen])) chosen = a;
  }
  return chosen;
}

ClassSet select_act(const ExpectedUtilities& eu, const ActList& acts) {
  return acts[select_act_index(eu.values, acts)];
}

}  // namespace efcn
