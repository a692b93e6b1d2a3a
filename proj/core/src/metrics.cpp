#include "efcn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "efcn/error.hpp"

namespace efcn {

LabelMap assign_acts(const Tensor& betp, const UtilityTable& table) {
  if (betp.rank() != 3 || betp.channels() != table.classes())
    fail(ErrorKind::Dimension, "BetP map channels do not match the utility table");
  LabelMap out(betp.height(), betp.width());
  std::vector<double> eu(table.acts().size());
  for (std::size_t y = 0; y < betp.height(); ++y) {
    for (std::size_t x = 0; x < betp.width(); ++x) {
      expected_utilities_into(betp.pixel(y, x), table.extended(), eu);
      out.at(y, x) = table.acts()[select_act_index(eu, table.acts())];
    }
  }
  return out;
}

SegResult segment(const Model& model, const SegSample& sample, const UtilityTable& table) {
  SegResult r;
  r.betp = pignistic_map(model.masses(sample.image));
  r.assigned = assign_acts(r.betp, table);
  r.labels = sample.labels;
  return r;
}

SegResult reassign(const SegResult& result, const UtilityTable& table) {
  SegResult r = result;
  r.assigned = assign_acts(r.betp, table);
  return r;
}

namespace {

void check_label(ClassSet label, const UtilityTable& table) {
  if (label.size() == 1) return;
  const auto& labels = table.labels();
  if (std::find(labels.begin(), labels.end(), label) == labels.end())
    fail(ErrorKind::Config, "label has no column in the soft-label utility matrix");
}

void check_shapes(const SegResult& r) {
  if (r.assigned.height != r.labels.height || r.assigned.width != r.labels.width)
    fail(ErrorKind::Dimension, "assigned and label maps differ in size");
}

}  // namespace

double pixel_utility(std::span<const SegResult> results, const UtilityTable& table) {
  double sum = 0.0;
  std::size_t count = 0;
  for (const SegResult& r : results) {
    check_shapes(r);
    for (std::size_t i = 0; i < r.labels.size(); ++i) {
      const ClassSet label = r.labels.cells[i];
      if (label.empty()) continue;
      check_label(label, table);
      sum += table.utility(r.assigned.cells[i], label);
      ++count;
    }
  }
  return count ? sum / static_cast<double>(count) : 0.0;
}

double pixel_utility(const SegResult& result, const UtilityTable& table) {
  return pixel_utility(std::span<const SegResult>(&result, 1), table);
}

std::vector<ClassSet> default_label_universe(std::span<const SegResult> results) {
  std::set<ClassSet, CardinalityOrder> universe;
  for (const SegResult& r : results) {
    for (std::size_t i = 0; i < r.labels.size(); ++i) {
      if (!r.labels.cells[i].empty()) universe.insert(r.labels.cells[i]);
      const std::uint64_t bits = r.assigned.cells[i].bits();
      for (std::size_t j = 0; j < 64; ++j) {
        if ((bits >> j) & 1U) universe.insert(ClassSet::singleton(j));
      }
    }
  }
  return {universe.begin(), universe.end()};
}

double uiou(std::span<const SegResult> results, const UtilityTable& table, std::span<const ClassSet> universe) {
  std::vector<double> inter(universe.size(), 0.0);
  std::vector<std::size_t> uni(universe.size(), 0);
  for (const SegResult& r : results) {
    check_shapes(r);
    for (std::size_t i = 0; i < r.labels.size(); ++i) {
      const ClassSet label = r.labels.cells[i];
      if (label.empty()) continue;
      const ClassSet act = r.assigned.cells[i];
      for (std::size_t b = 0; b < universe.size(); ++b) {
        const bool in_g = label == universe[b];
        const bool in_p = act.intersects(universe[b]);
        if (in_g || in_p) ++uni[b];
        if (in_g && in_p) inter[b] += table.utility(act, label);
      }
    }
  }
  double sum = 0.0;
  std::size_t terms = 0;
  for (std::size_t b = 0; b < universe.size(); ++b) {
    if (uni[b] == 0) continue;
    sum += inter[b] / static_cast<double>(uni[b]);
    ++terms;
  }
  return terms ? sum / static_cast<double>(terms) : 0.0;
}

double uiou(std::span<const SegResult> results, const UtilityTable& table) {
  const auto universe = default_label_universe(results);
  return uiou(results, table, universe);
}

double confidence(std::span<const double> betp, ClassSet label) {
  if (label.empty()) fail(ErrorKind::InvalidLabel, "confidence of an empty label");
  double c = 0.0;
  for (std::size_t j = 0; j < betp.size(); ++j) {
    if (label.contains(j)) c += betp[j];
  }
  return c;
}

double confidence(const PignisticDist& betp, ClassSet label) { return confidence(betp.probs, label); }

CalibrationReport calibration_from_pairs(std::span<const double> confidences, std::span<const double> utilities,
                                         std::size_t bins) {
  if (bins == 0) fail(ErrorKind::InvalidArgument, "calibration needs at least one bin");
  if (confidences.size() != utilities.size()) fail(ErrorKind::Dimension, "confidence and utility counts differ");
  CalibrationReport rep;
  rep.bins = bins;
  rep.bin_counts.assign(bins, 0);
  rep.bin_confidence.assign(bins, 0.0);
  rep.bin_utility.assign(bins, 0.0);
  const double q = static_cast<double>(bins);
  for (std::size_t i = 0; i < confidences.size(); ++i) {
    const double co = confidences[i];
    // ceil(co * Q) - 1, with a small slack so 0.2 * 10 lands in bin 2.
    double pos = std::ceil(co * q - 1e-9) - 1.0;
    const std::size_t b = static_cast<std::size_t>(std::clamp(pos, 0.0, q - 1.0));
    ++rep.bin_counts[b];
    rep.bin_confidence[b] += co;
    rep.bin_utility[b] += utilities[i];
  }
  double total = 0.0;
  for (std::size_t b = 0; b < bins; ++b) {
    if (rep.bin_counts[b] == 0) continue;
    const double n = static_cast<double>(rep.bin_counts[b]);
    rep.bin_confidence[b] /= n;
    rep.bin_utility[b] /= n;
    rep.ece += n * std::abs(rep.bin_confidence[b] - rep.bin_utility[b]);
    total += n;
  }
  if (total > 0.0) rep.ece /= total;
  return rep;
}

CalibrationReport calibration(std::span<const SegResult> results, const UtilityTable& table, std::size_t bins) {
  std::vector<double> co;
  std::vector<double> au;
  for (const SegResult& r : results) {
    check_shapes(r);
    if (r.betp.height() != r.labels.height || r.betp.width() != r.labels.width)
      fail(ErrorKind::Dimension, "BetP map and label map differ in size");
    for (std::size_t y = 0; y < r.labels.height; ++y) {
      for (std::size_t x = 0; x < r.labels.width; ++x) {
        const ClassSet label = r.labels.at(y, x);
        if (label.empty()) continue;
        check_label(label, table);
        co.push_back(confidence(r.betp.pixel(y, x), label));
        au.push_back(table.utility(r.assigned.at(y, x), label));
      }
    }
  }
  return calibration_from_pairs(co, au, bins);
}

NoveltyReport novelty_stats(std::span<const SegResult> results, const Frame& known) {
  NoveltyReport rep;
  const ClassSet omega = known.omega();
  std::size_t unknown_omega = 0;
  std::size_t known_omega = 0;
  std::map<ClassSet, std::size_t> counts;
  for (const SegResult& r : results) {
    check_shapes(r);
    for (std::size_t i = 0; i < r.labels.size(); ++i) {
      const bool is_omega = r.assigned.cells[i] == omega;
      if (r.labels.cells[i].empty()) {
        ++rep.unknown_pixels;
        unknown_omega += is_omega;
        ++counts[r.assigned.cells[i]];
      } else {
        ++rep.known_pixels;
        known_omega += is_omega;
      }
    }
  }
  if (rep.unknown_pixels)
    rep.unknown_omega_rate = static_cast<double>(unknown_omega) / static_cast<double>(rep.unknown_pixels);
  if (rep.known_pixels)
    rep.known_omega_rate = static_cast<double>(known_omega) / static_cast<double>(rep.known_pixels);
  for (const auto& [set, n] : counts)
    rep.unknown_assignments.emplace_back(set, static_cast<double>(n) / static_cast<double>(rep.unknown_pixels));
  std::stable_sort(rep.unknown_assignments.begin(), rep.unknown_assignments.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  return rep;
}

}  // namespace efcn
