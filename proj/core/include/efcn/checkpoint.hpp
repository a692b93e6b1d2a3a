#pragma once

#include <filesystem>

#include "efcn/model.hpp"

namespace efcn {

// Binary model file: magic, version, a JSON header describing the frame,
// architecture, prototype bank shape, act list and gamma, then every
// parameter array as little-endian 64-bit reals.
void save_checkpoint(const std::filesystem::path& path, const Model& model);
Model load_checkpoint(const std::filesystem::path& path);

}  // namespace efcn
