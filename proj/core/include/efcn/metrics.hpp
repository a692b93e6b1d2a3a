#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "efcn/belief.hpp"
#include "efcn/data.hpp"
#include "efcn/frame.hpp"
#include "efcn/model.hpp"
#include "efcn/tensor.hpp"
#include "efcn/utility.hpp"

namespace efcn {

// Assigned sets, pignistic probabilities and ground truth for one image.
// Empty label cells are unknown-class pixels.
struct SegResult {
  LabelMap assigned;
  Tensor betp;  // H x W x M
  LabelMap labels;
};

// Act of maximal expected utility at every pixel of an H x W x M BetP map.
LabelMap assign_acts(const Tensor& betp, const UtilityTable& table);

// Runs the model and assigns acts from `table`.
SegResult segment(const Model& model, const SegSample& sample, const UtilityTable& table);
// Re-assigns acts on an existing BetP map, e.g. for a different gamma.
SegResult reassign(const SegResult& result, const UtilityTable& table);

double pixel_utility(std::span<const SegResult> results, const UtilityTable& table);
double pixel_utility(const SegResult& result, const UtilityTable& table);

// Ground-truth labels plus every singleton touched by a prediction.
std::vector<ClassSet> default_label_universe(std::span<const SegResult> results);

double uiou(std::span<const SegResult> results, const UtilityTable& table, std::span<const ClassSet> universe);
double uiou(std::span<const SegResult> results, const UtilityTable& table);

double confidence(std::span<const double> betp, ClassSet label);
double confidence(const PignisticDist& betp, ClassSet label);

struct CalibrationReport {
  std::size_t bins = 0;
  std::vector<std::size_t> bin_counts;
  std::vector<double> bin_confidence;
  std::vector<double> bin_utility;
  double ece = 0.0;
};

// Bins (q-1)/Q < co <= q/Q; a confidence of exactly zero goes to the first bin.
CalibrationReport calibration_from_pairs(std::span<const double> confidences, std::span<const double> utilities,
                                         std::size_t bins);
CalibrationReport calibration(std::span<const SegResult> results, const UtilityTable& table, std::size_t bins = 10);

struct NoveltyReport {
  std::size_t unknown_pixels = 0;
  std::size_t known_pixels = 0;
  double unknown_omega_rate = 0.0;
  double known_omega_rate = 0.0;
  // Assigned sets on unknown pixels, most frequent first, with their share.
  std::vector<std::pair<ClassSet, double>> unknown_assignments;
};

NoveltyReport novelty_stats(std::span<const SegResult> results, const Frame& known);

}  // namespace efcn
