#include "efcn/belief.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "efcn/error.hpp"

namespace efcn {

double MassVector::total() const {
  return std::accumulate(singletons.begin(), singletons.end(), 0.0) + omega;
}

MassVector combine_simple(const MassVector& mu, const MassVector& m) {
  if (mu.classes() != m.classes())
    fail(ErrorKind::Dimension, "combine_simple: mass vectors over different frames (" +
                                   std::to_string(mu.classes()) + " vs " + std::to_string(m.classes()) + ")");
  MassVector out;
  out.singletons.resize(m.classes());
  for (std::size_t j = 0; j < m.classes(); ++j) {
    out.singletons[j] = mu.singletons[j] * (m.singletons[j] + m.omega) + mu.omega * m.singletons[j];
  }
  out.omega = mu.omega * m.omega;
  return out;
}

MassVector normalize(const MassVector& mu) {
  const double total = mu.total();
  if (!(total > 0.0)) fail(ErrorKind::DegenerateEvidence, "normalize: total mass is zero");
  MassVector out = mu;
  for (double& v : out.singletons) v /= total;
  out.omega /= total;
  return out;
}

GeneralMass dempster_oracle(const GeneralMass& m1, const GeneralMass& m2) {
  constexpr std::uint64_t kLimit = std::uint64_t{1} << 16;
  GeneralMass conjunctive;
  double conflict = 0.0;
  for (const auto& [b, mb] : m1) {
    if (b.bits() >= kLimit) fail(ErrorKind::ContractViolation, "dempster_oracle: frame larger than 16 classes");
    for (const auto& [c, mc] : m2) {
      if (c.bits() >= kLimit) fail(ErrorKind::ContractViolation, "dempster_oracle: frame larger than 16 classes");
      const ClassSet a = b & c;
      if (a.empty())
        conflict += mb * mc;
      else
        conjunctive[a] += mb * mc;
    }
  }
  double kept = 0.0;
  for (const auto& [a, v] : conjunctive) kept += v;
  if (!(kept > 0.0))
    fail(ErrorKind::NonCombinable, "dempster_oracle: total conflict (" + std::to_string(conflict) + ")");
  for (auto& [a, v] : conjunctive) v /= kept;
  return conjunctive;
}

GeneralMass to_general(const MassVector& m) {
  GeneralMass out;
  for (std::size_t j = 0; j < m.classes(); ++j) {
    if (m.singletons[j] != 0.0) out[ClassSet::singleton(j)] += m.singletons[j];
  }
  if (m.omega != 0.0) out[ClassSet::full(m.classes())] += m.omega;
  return out;
}

PignisticDist pignistic(const MassVector& m) {
  const double total = m.total();
  if (std::abs(total - 1.0) > 1e-6)
    fail(ErrorKind::ContractViolation, "pignistic: mass sums to " + std::to_string(total) + ", expected 1");
  PignisticDist out;
  out.probs.resize(m.classes());
  const double share = m.omega / static_cast<double>(m.classes());
  for (std::size_t j = 0; j < m.classes(); ++j) out.probs[j] = m.singletons[j] + share;
  return out;
}

PignisticDist pignistic(const GeneralMass& mass, std::size_t m) {
  PignisticDist out;
  out.probs.assign(m, 0.0);
  for (const auto& [a, v] : mass) {
    if (a.empty()) fail(ErrorKind::ContractViolation, "pignistic: mass on the empty set");
    const double share = v / static_cast<double>(a.size());
    for (std::size_t j = 0; j < m; ++j) {
      if (a.contains(j)) out.probs[j] += share;
    }
  }
  return out;
}

}  // namespace efcn
