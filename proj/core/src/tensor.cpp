#include "efcn/tensor.hpp"

#include <algorithm>
#include <functional>
#include <numeric>

#include "efcn/error.hpp"

namespace efcn {

namespace {

std::size_t volume(const std::vector<std::size_t>& dims) {
  if (dims.empty()) fail(ErrorKind::Dimension, "tensor needs at least one dimension");
  for (std::size_t d : dims) {
    if (d == 0) fail(ErrorKind::Dimension, "tensor dimensions must be positive");
  }
  return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>());
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> dims, double fill) : dims_(std::move(dims)) {
  data_.assign(volume(dims_), fill);
}

Tensor::Tensor(std::vector<std::size_t> dims, std::vector<double> data)
    : dims_(std::move(dims)), data_(std::move(data)) {
  if (volume(dims_) != data_.size()) fail(ErrorKind::Dimension, "tensor data length does not match dims");
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) fail(ErrorKind::Dimension, "dot: length mismatch");
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

}  // namespace efcn
