#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "efcn/belief.hpp"
#include "efcn/frame.hpp"

namespace efcn {

struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}
  static Matrix identity(std::size_t n);

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

  bool operator==(const Matrix&) const = default;
};

// Tolerance to imprecision of OWA weights g_1..g_k: sum_i (k-i)/(k-1) g_i.
double tolerance_to_imprecision(std::span<const double> weights);
double owa_entropy(std::span<const double> weights);

// Maximum-entropy OWA weights of length k with the given tolerance to
// imprecision, gamma in [0.5, 1]. The optimum is geometric, g_{i+1} = q g_i,
// and q is found by bisection on the tolerance residual.
std::vector<double> solve_owa(double gamma, std::size_t k);

struct OwaWeights {
  double gamma = 0.5;
  std::vector<std::vector<double>> by_cardinality;  // entry k-1 holds g_1..g_k

  static OwaWeights solve(double gamma, std::size_t max_cardinality);
  std::span<const double> for_cardinality(std::size_t k) const { return by_cardinality.at(k - 1); }
};

// OWA of the utilities {u_ij : w_i in A} for each true class j.
std::vector<double> extend_row(const Matrix& base, ClassSet act, const OwaWeights& owa);
Matrix extend_utilities(const Matrix& base, const ActList& acts, const OwaWeights& owa);

// Normalized average utility of each act against each (possibly set-valued)
// label. Every label must also appear in `acts`.
Matrix soft_label_utilities(const Matrix& extended, const ActList& acts, std::span<const ClassSet> labels);

// Base, extended and soft-label utility matrices for one decision problem.
// Fixed once built.
class UtilityTable {
 public:
  UtilityTable(const Matrix& base, ActList acts, double gamma, std::vector<ClassSet> labels = {});
  static UtilityTable identity(const Frame& frame, ActList acts, double gamma, std::vector<ClassSet> labels = {});

  std::size_t classes() const { return base_.rows; }
  double gamma() const { return owa_.gamma; }
  const ActList& acts() const { return acts_; }
  const Matrix& base() const { return base_; }
  const Matrix& extended() const { return extended_; }
  const Matrix& soft() const { return soft_; }
  const std::vector<ClassSet>& labels() const { return labels_; }
  const OwaWeights& owa() const { return owa_; }

  // Utility of act `act` under label `label`, for any non-empty pair of sets.
  // Singleton labels reduce to the extended matrix.
  double utility(ClassSet act, ClassSet label) const;

 private:
  Matrix base_;
  ActList acts_;
  OwaWeights owa_;
  Matrix extended_;
  std::vector<ClassSet> labels_;
  Matrix soft_;
};

struct ExpectedUtilities {
  std::vector<double> values;
};

void expected_utilities_into(std::span<const double> betp, const Matrix& extended, std::span<double> out);
ExpectedUtilities expected_utilities(const PignisticDist& betp, const UtilityTable& table);

// Utilities within this distance of the maximum count as tied.
inline constexpr double kTieTolerance = 1e-12;

// Act of highest expected utility; ties go to the smaller set, then the
// lower bit value.
std::size_t select_act_index(std::span<const double> eu, const ActList& acts);
ClassSet select_act(const ExpectedUtilities& eu, const ActList& acts);

}  // namespace efcn
