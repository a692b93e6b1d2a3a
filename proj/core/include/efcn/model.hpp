#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "efcn/backbone.hpp"
#include "efcn/ds_layer.hpp"
#include "efcn/frame.hpp"
#include "efcn/tensor.hpp"

namespace efcn {

// Encoder-decoder backbone followed by the DS layer. The act list and gamma
// are the ones the loss was configured with.
struct Model {
  Frame frame;
  Backbone backbone;
  PrototypeBank bank;
  ActList acts;
  double gamma = 0.8;

  static Model create(const Frame& frame, const Architecture& arch, std::size_t prototypes, ActList acts, double gamma,
                      std::uint64_t seed);

  // H x W x (M+1) normalized masses.
  Tensor masses(const Tensor& image) const;

  // Every trainable array, backbone layers first, then the prototype bank.
  std::vector<std::span<double>> parameter_views();
  std::vector<std::span<const double>> parameter_views() const;
  std::size_t parameter_count() const;
};

struct ModelGrad {
  std::vector<LayerParams> layers;
  PrototypeBank bank;

  static ModelGrad zeros_like(const Model& model);
  // Same order as Model::parameter_views().
  std::vector<std::span<double>> views();
  void clear();
};

// H x W x M pignistic probabilities from a mass map.
Tensor pignistic_map(const Tensor& masses);

}  // namespace efcn
