#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "efcn/belief.hpp"
#include "efcn/tensor.hpp"

namespace efcn {

// Trainable parameters of the Dempster-Shafer layer. Reliabilities and
// memberships are stored unconstrained:
//   alpha_l = sigmoid(xi_l),  v_lj = delta_lj^2 / sum_j' delta_lj'^2.
struct PrototypeBank {
  std::size_t count = 0;     // n
  std::size_t features = 0;  // P
  std::size_t classes = 0;   // M
  std::vector<double> prototypes;  // n x P
  std::vector<double> eta;         // n
  std::vector<double> xi;          // n
  std::vector<double> delta;       // n x M

  static PrototypeBank zeros(std::size_t n, std::size_t p, std::size_t m);
  // Prototypes ~ N(0, 1/sqrt(P)), eta ~ N(0.1, 0.02), xi ~ N(0, 0.5),
  // delta ~ N(0, 1).
  static PrototypeBank random(std::size_t n, std::size_t p, std::size_t m, std::mt19937_64& rng);

  std::span<const double> prototype(std::size_t l) const { return {prototypes.data() + l * features, features}; }
  double alpha(std::size_t l) const;
  void memberships(std::size_t l, std::span<double> out) const;

  std::array<std::span<double>, 4> views();
  std::array<std::span<const double>, 4> views() const;

  bool same_shape(const PrototypeBank& o) const {
    return count == o.count && features == o.features && classes == o.classes;
  }
  bool operator==(const PrototypeBank&) const = default;
};

// Throws TrainingDivergence naming the first non-finite parameter.
void validate_bank(const PrototypeBank& bank);

struct DsForwardTrace {
  std::size_t classes = 0;
  std::vector<double> distances;         // n
  std::vector<double> similarities;      // n
  std::vector<double> memberships;       // n x M
  std::vector<double> prototype_masses;  // n x (M+1), Omega last
  std::vector<double> partial;           // (n+1) x (M+1): vacuous, mu^1, ..., mu^n
  double total = 0.0;                    // total mass of mu^n before normalizing
  bool degenerate = false;

  std::size_t count() const { return distances.size(); }
  MassVector prototype_mass(std::size_t l) const;
  MassVector unnormalized_total() const;
};

// Lifetime count of pixels whose combined evidence had zero total mass and
// fell back to the vacuous mass function.
std::uint64_t ds_degenerate_count();

// Writes the normalized mass (M singletons, then Omega) into `out`.
void ds_forward_into(std::span<const double> x, const PrototypeBank& bank, DsForwardTrace& trace,
                     std::span<double> out);

std::pair<MassVector, DsForwardTrace> ds_forward(std::span<const double> x, const PrototypeBank& bank);

// Accumulates gradients of <grad_out, m(x)> into grad_bank and grad_x.
void ds_backward_accumulate(std::span<const double> grad_out, const DsForwardTrace& trace,
                            std::span<const double> x, const PrototypeBank& bank, PrototypeBank& grad_bank,
                            std::span<double> grad_x);

struct DsGradient {
  PrototypeBank bank;
  std::vector<double> x;
};

DsGradient ds_backward(std::span<const double> grad_out, const DsForwardTrace& trace, std::span<const double> x,
                       const PrototypeBank& bank);

// Per-pixel DS layer over an H x W x P feature map; result is H x W x (M+1).
Tensor ds_forward_map(const Tensor& features, const PrototypeBank& bank);

}  // namespace efcn
