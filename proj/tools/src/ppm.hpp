#pragma once

#include <filesystem>

#include "efcn/data.hpp"
#include "efcn/frame.hpp"
#include "efcn/tensor.hpp"

namespace efcn::cli {

// Overlay of assignments on the input image: red where the assigned set
// misses the label, green for multi-class sets, pink for Omega.
void write_assignment_ppm(const std::filesystem::path& path, const Tensor& image, const LabelMap& assigned,
                          const LabelMap& labels, const Frame& frame);

}  // namespace efcn::cli
