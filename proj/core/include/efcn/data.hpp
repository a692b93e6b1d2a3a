#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "efcn/frame.hpp"
#include "efcn/tensor.hpp"

namespace efcn {

// Per-pixel labels. An empty ClassSet marks a pixel of a class outside the
// frame (the unknown-class sentinel).
struct LabelMap {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<ClassSet> cells;

  LabelMap() = default;
  LabelMap(std::size_t h, std::size_t w, ClassSet fill = {}) : height(h), width(w), cells(h * w, fill) {}

  ClassSet& at(std::size_t y, std::size_t x) { return cells[y * width + x]; }
  ClassSet at(std::size_t y, std::size_t x) const { return cells[y * width + x]; }
  std::size_t size() const { return cells.size(); }

  bool operator==(const LabelMap&) const = default;
};

struct SegSample {
  Tensor image;  // H x W x C
  LabelMap labels;
};

struct SegDataset {
  Frame frame;
  std::vector<SegSample> samples;
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
  std::optional<std::string> unknown_class;

  // Distinct multi-class labels occurring in the given split, in
  // cardinality-then-bit order.
  std::vector<ClassSet> soft_labels(const std::vector<std::size_t>& split) const;
  void validate() const;
};

struct SyntheticConfig {
  std::size_t train = 400;
  std::size_t val = 0;
  std::size_t test = 400;
  std::size_t height = 32;
  std::size_t width = 32;
  std::uint64_t seed = 0;
  std::size_t boundary_width = 2;  // total band width straddling a border
  double noise = 0.08;
  // Gaussian blur (sigma, px) applied to the clean colours before noise, so
  // pixels near a border mix the colours of both sides.
  double edge_blur = 1.0;
  std::size_t min_shape = 8;
  std::size_t max_shape = 16;
  std::size_t max_shapes = 3;
  // Adds one shape of a held-out class (the next palette colour) to every
  // test image; its pixels are labelled with the sentinel.
  bool unknown_in_test = false;
};

// Base colour of palette entry k (k < 9).
std::vector<double> palette_colour(std::size_t k);

// Images hold 1..max_shapes rectangles or discs of distinct non-background
// classes over class 0. Consumption of the random stream does not depend on
// boundary_width, so two configs differing only there yield identical images.
SegDataset gen_synthetic(const Frame& frame, const SyntheticConfig& cfg);

// Soft labels from a hard class map (sentinel cells stay sentinel): each known
// pixel within ceil(bw/2) pixels (Chebyshev) of a different known class gets
// the union of the known classes in that window.
LabelMap soften_labels(const LabelMap& hard, std::size_t boundary_width);

void save_tensor(const std::filesystem::path& path, const Tensor& t, bool as_float32 = false);
Tensor load_tensor(const std::filesystem::path& path);

void save_mask(const std::filesystem::path& path, const LabelMap& labels, const Frame& frame);
LabelMap load_mask(const std::filesystem::path& path, const Frame& frame);

// Writes images/, labels/ and manifest.json under `dir`.
void save_dataset(const std::filesystem::path& dir, const SegDataset& ds);
SegDataset load_dataset(const std::filesystem::path& dir);

}  // namespace efcn
