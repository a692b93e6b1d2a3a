#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "efcn/backbone.hpp"
#include "efcn/data.hpp"
#include "efcn/frame.hpp"
#include "efcn/training.hpp"
#include "efcn/utility.hpp"

namespace efcn {

enum class ActPolicy { Singletons, SoftLabels, Explicit };

struct MetricsConfig {
  std::size_t bins = 10;
  std::vector<double> gamma_grid;  // empty: 0.5, 0.55, ..., 1.0
};

// Everything a run needs, parsed from a JSON file. Unknown keys are errors.
struct RunConfig {
  std::vector<std::string> classes;
  Architecture architecture;
  std::size_t prototypes = 0;  // 0: five per class
  ActPolicy acts = ActPolicy::SoftLabels;
  std::vector<ClassSet> explicit_acts;
  double gamma = 0.8;
  std::optional<Matrix> utility_matrix;
  TrainConfig training;
  MetricsConfig metrics;
  SyntheticConfig synthetic;
  std::uint64_t seed = 0;

  Frame frame() const { return Frame(classes); }
  std::size_t prototype_count() const { return prototypes ? prototypes : 5 * classes.size(); }
  std::vector<double> gamma_grid() const;
};

RunConfig parse_run_config(std::string_view json_text);
RunConfig load_run_config(const std::filesystem::path& path);
std::string run_config_to_json(const RunConfig& cfg);

std::string architecture_to_json(const Architecture& arch);
Architecture architecture_from_json(std::string_view json_text);

// "Omega", a class name, or names joined by '+'.
ClassSet parse_class_set(const Frame& frame, std::string_view text);
std::string format_class_set(const Frame& frame, ClassSet s);

// Act list for the configured policy; `soft_labels` are the multi-class
// labels seen in the training data.
ActList resolve_acts(const RunConfig& cfg, const Frame& frame, std::span<const ClassSet> soft_labels);

UtilityTable make_table(const RunConfig& cfg, const Frame& frame, const ActList& acts, double gamma,
                        std::vector<ClassSet> labels = {});

}  // namespace efcn
