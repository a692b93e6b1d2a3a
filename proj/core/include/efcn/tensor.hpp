#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace efcn {

// Dense row-major array, rank 3 (height, width, channels) or rank 4
// (batch, height, width, channels). Channels are the fastest axis.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> dims, double fill = 0.0);
  Tensor(std::vector<std::size_t> dims, std::vector<double> data);

  static Tensor hwc(std::size_t h, std::size_t w, std::size_t c, double fill = 0.0) {
    return Tensor({h, w, c}, fill);
  }

  const std::vector<std::size_t>& dims() const { return dims_; }
  std::size_t rank() const { return dims_.size(); }
  std::size_t dim(std::size_t i) const { return dims_.at(i); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  // Rank-3 accessors.
  std::size_t height() const { return dims_[rank() - 3]; }
  std::size_t width() const { return dims_[rank() - 2]; }
  std::size_t channels() const { return dims_[rank() - 1]; }

  double& operator()(std::size_t y, std::size_t x, std::size_t c) {
    return data_[(y * dims_[1] + x) * dims_[2] + c];
  }
  double operator()(std::size_t y, std::size_t x, std::size_t c) const {
    return data_[(y * dims_[1] + x) * dims_[2] + c];
  }

  std::span<double> pixel(std::size_t y, std::size_t x) {
    return {data_.data() + (y * dims_[1] + x) * dims_[2], dims_[2]};
  }
  std::span<const double> pixel(std::size_t y, std::size_t x) const {
    return {data_.data() + (y * dims_[1] + x) * dims_[2], dims_[2]};
  }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::vector<double>& storage() { return data_; }
  const std::vector<double>& storage() const { return data_; }

  void fill(double v);

  bool operator==(const Tensor&) const = default;

 private:
  std::vector<std::size_t> dims_;
  std::vector<double> data_;
};

double dot(std::span<const double> a, std::span<const double> b);

}  // namespace efcn
