#include "efcn/utility.hpp"

#include <cmath>
#include <numeric>
#include <random>

#include "test_util.hpp"

namespace efcn {
namespace {

using test::frame_of;
using test::set_of;

double tdi(const std::vector<double>& g) { return tolerance_to_imprecision(g); }

// Entropy maximizer for k = 3 found by scanning the feasible segment
// g = (t, 2(gamma - t), 1 + t - 2 gamma), then golden-section refinement.
std::vector<double> grid_oracle_k3(double gamma) {
  const double lo = std::max(0.0, 2 * gamma - 1), hi = gamma;
  auto at = [&](double t) { return std::vector<double>{t, 2 * (gamma - t), 1 + t - 2 * gamma}; };
  auto ent = [&](double t) { return owa_entropy(at(t)); };
  double best = lo;
  const int steps = 20000;
  for (int i = 0; i <= steps; ++i) {
    const double t = lo + (hi - lo) * i / steps;
    if (ent(t) > ent(best)) best = t;
  }
  double a = std::max(lo, best - (hi - lo) / steps), b = std::min(hi, best + (hi - lo) / steps);
  const double r = (std::sqrt(5.0) - 1) / 2;
  for (int i = 0; i < 200; ++i) {
    const double c = b - r * (b - a), d = a + r * (b - a);
    if (ent(c) > ent(d)) b = d; else a = c;
  }
  return at((a + b) / 2);
}

TEST(SolveOwa, KnownValues) {
  EXPECT_EQ(solve_owa(0.8, 1), std::vector<double>{1.0});
  const auto g2 = solve_owa(0.8, 2);
  EXPECT_NEAR(g2[0], 0.8, 1e-12);
  EXPECT_NEAR(g2[1], 0.2, 1e-12);
  const auto g3 = solve_owa(0.8, 3);
  EXPECT_NEAR(g3[0], 0.6819, 1e-4);
  EXPECT_NEAR(tdi(g3), 0.8, 1e-9);
}

TEST(SolveOwa, MatchesGridOracleForThreeWeights) {
  for (double gamma = 0.5; gamma <= 1.0 + 1e-9; gamma += 0.05) {
    const auto g = solve_owa(std::min(gamma, 1.0), 3);
    const auto o = grid_oracle_k3(std::min(gamma, 1.0));
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(g[i], o[i], 1e-6) << "gamma " << gamma;
  }
}

TEST(SolveOwa, LimitCases) {
  for (std::size_t k = 2; k <= 8; ++k) {
    const auto one = solve_owa(1.0, k);
    EXPECT_NEAR(one[0], 1.0, 1e-9);
    for (std::size_t i = 1; i < k; ++i) EXPECT_NEAR(one[i], 0.0, 1e-9);
    const auto half = solve_owa(0.5, k);
    for (double v : half) EXPECT_NEAR(v, 1.0 / k, 1e-9);
  }
}

TEST(SolveOwa, ConstraintsHold) {
  for (std::size_t k = 2; k <= 12; ++k)
    for (double gamma = 0.5; gamma <= 1.0; gamma += 0.01) {
      const auto g = solve_owa(gamma, k);
      EXPECT_NEAR(std::accumulate(g.begin(), g.end(), 0.0), 1.0, 1e-9);
      EXPECT_NEAR(tdi(g), gamma, 1e-9);
      for (double v : g) EXPECT_GE(v, 0.0);
    }
}

TEST(SolveOwa, NoFeasiblePointHasHigherEntropy) {
  std::mt19937_64 rng(99);
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int audited = 0;
  while (audited < 10000) {
    const std::size_t k = 3 + audited % 5;
    const double gamma = 0.5 + 0.5 * u(rng);
    const auto g = solve_owa(gamma, k);
    // Random direction in the null space of the two equality constraints.
    std::vector<double> c(k), d(k);
    for (std::size_t i = 0; i < k; ++i) c[i] = double(k - 1 - i) / double(k - 1);
    for (double& v : d) v = n(rng);
    auto project = [&](std::vector<double> a) {
      const double ma = std::accumulate(a.begin(), a.end(), 0.0) / k;
      for (double& v : a) v -= ma;
      return a;
    };
    d = project(d);
    const auto cc = project(c);
    const double dc = std::inner_product(d.begin(), d.end(), cc.begin(), 0.0);
    const double cn = std::inner_product(cc.begin(), cc.end(), cc.begin(), 0.0);
    for (std::size_t i = 0; i < k; ++i) d[i] -= dc / cn * cc[i];
    double tmax = 1e300;
    for (std::size_t i = 0; i < k; ++i)
      if (d[i] < 0) tmax = std::min(tmax, -g[i] / d[i]);
    if (!(tmax > 0) || tmax > 1e299) continue;
    std::vector<double> h(k);
    const double t = tmax * u(rng);
    for (std::size_t i = 0; i < k; ++i) h[i] = std::max(0.0, g[i] + t * d[i]);
    ASSERT_NEAR(tdi(h), gamma, 1e-9);
    EXPECT_LE(owa_entropy(h), owa_entropy(g) + 1e-12);
    ++audited;
  }
}

TEST(SolveOwa, RejectsOutOfRange) {
  EXPECT_EFCN_ERROR(solve_owa(0.49, 3), InvalidArgument);
  EXPECT_EFCN_ERROR(solve_owa(1.01, 3), InvalidArgument);
  EXPECT_EFCN_ERROR(solve_owa(0.8, 0), InvalidArgument);
}

UtilityTable table1(double gamma = 0.8) {
  const Frame f = frame_of(3);
  return UtilityTable::identity(f, build_act_list(f, subsets_of_size(f, 2)), gamma);
}

TEST(UtilityTable, ExtendedMatchesPublishedTable) {
  const UtilityTable t = table1();
  ASSERT_EQ(t.acts().size(), 7u);
  // Rows: w1, w2, w3, {w1,w2}, {w1,w3}, {w2,w3}, Omega.
  const double expected[7][3] = {{1, 0, 0},     {0, 1, 0},     {0, 0, 1},          {0.8, 0.8, 0},
                                 {0.8, 0, 0.8}, {0, 0.8, 0.8}, {0.6819, 0.6819, 0.6819}};
  for (std::size_t a = 0; a < 7; ++a)
    for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(t.extended()(a, j), expected[a][j], 1e-3) << a << "," << j;
}

TEST(UtilityTable, SoftLabelsMatchPublishedTable) {
  const Frame f = frame_of(3);
  std::vector<ClassSet> labels{set_of({0}), set_of({1}), set_of({2}), set_of({0, 1}), set_of({0, 2}),
                               set_of({1, 2}), f.omega()};
  const UtilityTable t = UtilityTable::identity(f, build_act_list(f, subsets_of_size(f, 2)), 0.8, labels);
  const double expected[7][7] = {
      {1, 0, 0, 0.625, 0.625, 0, 0.489},       {0, 1, 0, 0.625, 0, 0.625, 0.489},
      {0, 0, 1, 0, 0.625, 0.625, 0.489},       {0.8, 0.8, 0, 1, 0.5, 0.5, 0.782},
      {0.8, 0, 0.8, 0.5, 1, 0.5, 0.782},       {0, 0.8, 0.8, 0.5, 0.5, 1, 0.782},
      {0.682, 0.682, 0.682, 0.853, 0.853, 0.853, 1}};
  for (std::size_t a = 0; a < 7; ++a)
    for (std::size_t l = 0; l < 7; ++l) {
      EXPECT_NEAR(t.soft()(a, l), expected[a][l], 1e-3) << a << "," << l;
      EXPECT_NEAR(t.utility(t.acts()[a], labels[l]), t.soft()(a, l), 1e-15);
    }
}

TEST(UtilityTable, Invariants) {
  const Frame f = frame_of(4);
  std::vector<ClassSet> labels;
  for (std::size_t k = 1; k <= 4; ++k)
    for (ClassSet s : subsets_of_size(f, k)) labels.push_back(s);
  for (double gamma : {0.55, 0.7, 0.9}) {
    const UtilityTable t = UtilityTable::identity(f, build_act_list(f, labels), gamma, labels);
    for (std::size_t a = 0; a < t.acts().size(); ++a) {
      const ClassSet act = t.acts()[a];
      if (act.size() == 1)
        for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(t.extended()(a, j), t.base()(act.lowest(), j));
      for (std::size_t l = 0; l < labels.size(); ++l) {
        const double u = t.soft()(a, l);
        if (act == labels[l]) EXPECT_NEAR(u, 1.0, 1e-12);
        else EXPECT_LT(u, 1.0 - 1e-9);
        if (!act.intersects(labels[l])) EXPECT_EQ(u, 0.0);
        if (labels[l].size() == 1) EXPECT_NEAR(u, t.extended()(a, labels[l].lowest()), 1e-15);
      }
    }
  }
}

TEST(UtilityTable, ToleranceEndpointsSaturateSubsetUtilities) {
  // At gamma = 0.5 a pair label normalizes by its own mean utility 0.5, so a
  // singleton inside it scores 1; at gamma = 1 so does Omega.
  const Frame f = frame_of(3);
  const std::vector<ClassSet> labels{set_of({0, 1})};
  const UtilityTable half = UtilityTable::identity(f, build_act_list(f, labels), 0.5, labels);
  EXPECT_NEAR(half.utility(set_of({0}), set_of({0, 1})), 1.0, 1e-12);
  const UtilityTable full = UtilityTable::identity(f, build_act_list(f, labels), 1.0, labels);
  EXPECT_NEAR(full.utility(f.omega(), set_of({0, 1})), 1.0, 1e-12);
  EXPECT_NEAR(full.utility(set_of({0}), set_of({0, 1})), 0.5, 1e-12);
}

TEST(UtilityTable, RejectsBadInput) {
  const Frame f = frame_of(3);
  const ActList acts = build_act_list(f, {});
  EXPECT_EFCN_ERROR(UtilityTable(Matrix(3, 2), acts, 0.8), Dimension);
  Matrix zero(3, 3, 0.0);
  const std::vector<ClassSet> label{set_of({0, 1})};
  EXPECT_EFCN_ERROR(UtilityTable(zero, build_act_list(f, label), 0.8, label), InvalidLabel);
  const std::vector<ClassSet> empty_label{ClassSet{}};
  EXPECT_EFCN_ERROR(UtilityTable(Matrix::identity(3), acts, 0.8, empty_label), InvalidLabel);
  // A label that is not an act still gets a column.
  const std::vector<ClassSet> extra{set_of({0, 2})};
  const UtilityTable t(Matrix::identity(3), acts, 0.8, extra);
  EXPECT_NEAR(t.soft()(0, 0), 0.625, 1e-3);
  EXPECT_NEAR(t.soft()(3, 0), 0.853, 1e-3);
}

TEST(ExpectedUtilities, Examples) {
  const UtilityTable t = table1();
  const ExpectedUtilities point = expected_utilities(PignisticDist{{0, 1, 0}}, t);
  for (std::size_t a = 0; a < 7; ++a) EXPECT_DOUBLE_EQ(point.values[a], t.extended()(a, 1));
  const ExpectedUtilities uni = expected_utilities(PignisticDist{{1.0 / 3, 1.0 / 3, 1.0 / 3}}, t);
  for (int a = 0; a < 3; ++a) EXPECT_NEAR(uni.values[a], 1.0 / 3, 1e-12);
  for (int a = 3; a < 6; ++a) EXPECT_NEAR(uni.values[a], 1.6 / 3, 1e-12);
  EXPECT_NEAR(uni.values[6], 0.6819, 1e-4);
  const UtilityTable full = table1(1.0);
  const ExpectedUtilities e = expected_utilities(PignisticDist{{0.2, 0.5, 0.3}}, full);
  EXPECT_NEAR(e.values[6], 1.0, 1e-12);
}

TEST(SelectAct, Examples) {
  const UtilityTable t = table1();
  const Frame f = frame_of(3);
  EXPECT_EQ(select_act(expected_utilities(pignistic(MassVector::vacuous(3)), t), t.acts()), f.omega());
  EXPECT_EQ(select_act(expected_utilities(PignisticDist{{1, 0, 0}}, t), t.acts()), set_of({0}));
  EXPECT_EFCN_ERROR(select_act(ExpectedUtilities{std::vector<double>(7, std::nan(""))}, t.acts()),
                    ContractViolation);
  EXPECT_EFCN_ERROR(select_act(ExpectedUtilities{std::vector<double>(3, 0.0)}, t.acts()), Dimension);
}

TEST(SelectAct, TiesPreferSmallerThenLowerSet) {
  const Frame f = frame_of(3);
  const ActList acts = build_act_list(f, subsets_of_size(f, 2));
  EXPECT_EQ(select_act(ExpectedUtilities{{0.5, 0.5, 0.1, 0.5, 0.2, 0.2, 0.5}}, acts), set_of({0}));
  EXPECT_EQ(select_act(ExpectedUtilities{{0.1, 0.5, 0.1, 0.5 + 1e-13, 0.2, 0.2, 0.5}}, acts), set_of({1}));
  EXPECT_EQ(select_act(ExpectedUtilities{{0.1, 0.1, 0.1, 0.3, 0.2, 0.3, 0.3}}, acts), set_of({0, 1}));
}

TEST(SelectAct, HalfToleranceNeverPicksOmega) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const UtilityTable t = table1(0.5);
  for (int i = 0; i < 2000; ++i) {
    std::vector<double> p{u(rng), u(rng), u(rng)};
    const double s = p[0] + p[1] + p[2];
    for (double& v : p) v /= s;
    EXPECT_EQ(select_act(expected_utilities(PignisticDist{p}, t), t.acts()).size(), 1u);
  }
}

}  // namespace
}  // namespace efcn
