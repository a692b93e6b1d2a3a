#include "efcn/metrics.hpp"

#include <random>

#include "test_util.hpp"

namespace efcn {
namespace {

using test::frame_of;
using test::set_of;

SegResult result_of(std::vector<ClassSet> assigned, std::vector<ClassSet> labels, std::size_t m = 3) {
  SegResult r;
  r.assigned = LabelMap(1, assigned.size());
  r.assigned.cells = std::move(assigned);
  r.labels = LabelMap(1, labels.size());
  r.labels.cells = std::move(labels);
  r.betp = Tensor::hwc(1, r.labels.width, m, 1.0 / m);
  return r;
}

UtilityTable table_with_pairs(double gamma, std::vector<ClassSet> labels = {}) {
  const Frame f = frame_of(3);
  return UtilityTable::identity(f, build_act_list(f, subsets_of_size(f, 2)), gamma, std::move(labels));
}

TEST(PixelUtility, Examples) {
  const UtilityTable t = table_with_pairs(0.8, {set_of({0, 1})});
  const ClassSet a = set_of({0}), b = set_of({1}), c = set_of({2}), ab = set_of({0, 1});
  EXPECT_DOUBLE_EQ(pixel_utility(result_of({a, b, ab}, {a, b, ab}), t), 1.0);
  EXPECT_DOUBLE_EQ(pixel_utility(result_of({c, c, c}, {a, b, ab}), t), 0.0);
  const ClassSet omega = frame_of(3).omega();
  EXPECT_NEAR(pixel_utility(result_of({a, b, omega, omega}, {a, b, c, a}), t), 0.841, 1e-3);
  // Unknown-class pixels are not scored.
  EXPECT_DOUBLE_EQ(pixel_utility(result_of({a, b}, {a, ClassSet{}}), t), 1.0);
  EXPECT_EFCN_ERROR(pixel_utility(result_of({a}, {set_of({1, 2})}), t), Config);
}

TEST(PixelUtility, EqualsAccuracyInPreciseCase) {
  const Frame f = frame_of(4);
  const UtilityTable t = UtilityTable::identity(f, build_act_list(f, {}), 0.8);
  std::mt19937_64 rng(3);
  std::vector<ClassSet> as, ls;
  std::size_t hits = 0;
  for (int i = 0; i < 500; ++i) {
    as.push_back(ClassSet::singleton(rng() % 4));
    ls.push_back(ClassSet::singleton(rng() % 4));
    hits += as.back() == ls.back();
  }
  EXPECT_DOUBLE_EQ(pixel_utility(result_of(as, ls, 4), t), hits / 500.0);
}

TEST(Uiou, Examples) {
  const UtilityTable t = table_with_pairs(0.8);
  const ClassSet a = set_of({0}), b = set_of({1}), ab = set_of({0, 1});
  EXPECT_DOUBLE_EQ(uiou(std::vector{result_of({a, b, a}, {a, b, a})}, t), 1.0);
  const std::vector rs{result_of({a, a, ab, ab}, {a, a, a, a})};
  // {w1}: (2 + 2 * 0.8) / 4; {w2}: nothing intersects over 2 predicted pixels.
  EXPECT_EQ(default_label_universe(rs), (std::vector<ClassSet>{a, b}));
  EXPECT_NEAR(uiou(rs, t), (0.9 + 0.0) / 2, 1e-12);
  EXPECT_DOUBLE_EQ(uiou(std::vector{result_of({b, b}, {a, a})}, t), 0.0);
}

TEST(Uiou, MatchesClassicalMeanIouForPreciseData) {
  const std::size_t m = 5;
  const Frame f = frame_of(m);
  const UtilityTable t = UtilityTable::identity(f, build_act_list(f, {}), 0.8);
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<ClassSet> as, ls;
    std::vector<std::vector<double>> conf(m, std::vector<double>(m, 0.0));
    for (int i = 0; i < 300; ++i) {
      const std::size_t g = rng() % m;
      const std::size_t p = rng() % 3 ? g : rng() % (m - 1);  // class m-1 only ever appears as a label
      as.push_back(ClassSet::singleton(p));
      ls.push_back(ClassSet::singleton(g));
      conf[g][p] += 1;
    }
    double sum = 0;
    int present = 0;
    for (std::size_t k = 0; k < m; ++k) {
      double row = 0, col = 0;
      for (std::size_t j = 0; j < m; ++j) {
        row += conf[k][j];
        col += conf[j][k];
      }
      const double u = row + col - conf[k][k];
      if (u == 0) continue;
      sum += conf[k][k] / u;
      ++present;
    }
    EXPECT_NEAR(uiou(std::vector{result_of(as, ls, m)}, t), sum / present, 1e-12);
  }
}

TEST(Confidence, Examples) {
  EXPECT_DOUBLE_EQ(confidence(PignisticDist{{0.2, 0.3, 0.5}}, frame_of(3).omega()), 1.0);
  EXPECT_DOUBLE_EQ(confidence(PignisticDist{{0.25, 0.25, 0.25, 0.25}}, set_of({2})), 0.25);
  EXPECT_DOUBLE_EQ(confidence(PignisticDist{{0.5625, 0.4375}}, set_of({1})), 0.4375);
  EXPECT_EFCN_ERROR(confidence(PignisticDist{{0.5, 0.5}}, ClassSet{}), InvalidLabel);
}

TEST(Calibration, Examples) {
  std::vector<double> co(10), au(10);
  for (int i = 0; i < 4; ++i) co[i] = 0.4, au[i] = 0.3;
  for (int i = 4; i < 10; ++i) co[i] = 0.9, au[i] = 0.85;
  const CalibrationReport r = calibration_from_pairs(co, au, 2);
  EXPECT_NEAR(r.ece, 0.07, 1e-12);
  EXPECT_EQ(r.bin_counts, (std::vector<std::size_t>{4, 6}));

  const std::vector<double> ones(5, 1.0), zeros(5, 0.0);
  EXPECT_DOUBLE_EQ(calibration_from_pairs(ones, ones, 10).ece, 0.0);
  EXPECT_DOUBLE_EQ(calibration_from_pairs(ones, zeros, 10).ece, 1.0);
  const std::vector<double> cs{0.2, 0.6}, us{0.6, 0.2};
  EXPECT_DOUBLE_EQ(calibration_from_pairs(cs, us, 1).ece, 0.0);
  EXPECT_EFCN_ERROR(calibration_from_pairs(cs, us, 0), InvalidArgument);
}

TEST(Calibration, BinEdges) {
  const std::vector<double> co{0.0, 0.1, 0.2, 0.2000001, 1.0}, au(5, 0.0);
  const CalibrationReport r = calibration_from_pairs(co, au, 10);
  EXPECT_EQ(r.bin_counts[0], 2u);
  EXPECT_EQ(r.bin_counts[1], 1u);
  EXPECT_EQ(r.bin_counts[2], 1u);
  EXPECT_EQ(r.bin_counts[9], 1u);
  std::size_t n = 0;
  for (auto c : r.bin_counts) n += c;
  EXPECT_EQ(n, 5u);
}

TEST(Novelty, ToleranceExtremes) {
  const Frame f = frame_of(3);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  SegResult r;
  r.betp = Tensor::hwc(4, 4, 3);
  r.labels = LabelMap(4, 4, set_of({0}));
  r.labels.cells[3] = r.labels.cells[7] = ClassSet{};
  for (std::size_t y = 0; y < 4; ++y)
    for (std::size_t x = 0; x < 4; ++x) {
      double p[3] = {u(rng), u(rng), u(rng)};
      const double s = p[0] + p[1] + p[2];
      for (int j = 0; j < 3; ++j) r.betp(y, x, j) = p[j] / s;
    }
  const ActList acts = build_act_list(f, subsets_of_size(f, 2));
  const std::vector full{reassign(r, UtilityTable::identity(f, acts, 1.0))};
  const NoveltyReport hi = novelty_stats(full, f);
  EXPECT_EQ(hi.unknown_pixels, 2u);
  EXPECT_EQ(hi.known_pixels, 14u);
  EXPECT_DOUBLE_EQ(hi.unknown_omega_rate, 1.0);
  EXPECT_DOUBLE_EQ(hi.known_omega_rate, 1.0);
  const std::vector half{reassign(r, UtilityTable::identity(f, acts, 0.5))};
  const NoveltyReport lo = novelty_stats(half, f);
  EXPECT_DOUBLE_EQ(lo.unknown_omega_rate, 0.0);
  EXPECT_DOUBLE_EQ(lo.known_omega_rate, 0.0);
}

TEST(Novelty, VacuousPixelsAreRejected) {
  const Frame f = frame_of(3);
  SegResult r;
  r.betp = Tensor::hwc(1, 3, 3, 1.0 / 3);
  r.labels = LabelMap(1, 3, set_of({1}));
  r.labels.cells[0] = ClassSet{};
  const std::vector rs{reassign(r, UtilityTable::identity(f, build_act_list(f, {}), 0.8))};
  const NoveltyReport n = novelty_stats(rs, f);
  EXPECT_DOUBLE_EQ(n.unknown_omega_rate, 1.0);
  ASSERT_EQ(n.unknown_assignments.size(), 1u);
  EXPECT_EQ(n.unknown_assignments[0].first, f.omega());
  EXPECT_DOUBLE_EQ(n.unknown_assignments[0].second, 1.0);
}

}  // namespace
}  // namespace efcn
