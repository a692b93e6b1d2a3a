#include "efcn/model.hpp"

#include <algorithm>
#include <random>

#include "efcn/error.hpp"

namespace efcn {

Model Model::create(const Frame& frame, const Architecture& arch, std::size_t prototypes, ActList acts, double gamma,
                    std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Backbone backbone = Backbone::random(arch, rng);
  PrototypeBank bank = PrototypeBank::random(prototypes, arch.feature_channels(), frame.size(), rng);
  return Model{frame, std::move(backbone), std::move(bank), std::move(acts), gamma};
}

Tensor Model::masses(const Tensor& image) const { return ds_forward_map(backbone.forward(image), bank); }

std::vector<std::span<double>> Model::parameter_views() {
  std::vector<std::span<double>> v;
  for (auto& p : backbone.params()) {
    v.emplace_back(p.weights);
    v.emplace_back(p.bias);
  }
  for (auto s : bank.views()) v.push_back(s);
  return v;
}

std::vector<std::span<const double>> Model::parameter_views() const {
  std::vector<std::span<const double>> v;
  for (const auto& p : backbone.params()) {
    v.emplace_back(p.weights);
    v.emplace_back(p.bias);
  }
  for (auto s : bank.views()) v.push_back(s);
  return v;
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (auto s : parameter_views()) n += s.size();
  return n;
}

ModelGrad ModelGrad::zeros_like(const Model& model) {
  return ModelGrad{model.backbone.zero_grads(),
                   PrototypeBank::zeros(model.bank.count, model.bank.features, model.bank.classes)};
}

std::vector<std::span<double>> ModelGrad::views() {
  std::vector<std::span<double>> v;
  for (auto& p : layers) {
    v.emplace_back(p.weights);
    v.emplace_back(p.bias);
  }
  for (auto s : bank.views()) v.push_back(s);
  return v;
}

void ModelGrad::clear() {
  for (auto s : views()) std::fill(s.begin(), s.end(), 0.0);
}

Tensor pignistic_map(const Tensor& masses) {
  if (masses.rank() != 3 || masses.channels() < 3) fail(ErrorKind::Dimension, "pignistic_map expects H x W x (M+1)");
  const std::size_t m = masses.channels() - 1;
  Tensor out = Tensor::hwc(masses.height(), masses.width(), m);
  for (std::size_t y = 0; y < masses.height(); ++y) {
    for (std::size_t x = 0; x < masses.width(); ++x) {
      const auto in = masses.pixel(y, x);
      auto o = out.pixel(y, x);
      const double share = in[m] / static_cast<double>(m);
      for (std::size_t j = 0; j < m; ++j) o[j] = in[j] + share;
    }
  }
  return out;
}

}  // namespace efcn
