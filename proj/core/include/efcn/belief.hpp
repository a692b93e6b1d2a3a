#pragma once

#include <cstddef>
#include <map>
#include <vector>

#include "efcn/frame.hpp"

namespace efcn {

// Mass function whose focal sets are restricted to the singletons and Omega.
struct MassVector {
  std::vector<double> singletons;
  double omega = 0.0;

  static MassVector vacuous(std::size_t m) { return {std::vector<double>(m, 0.0), 1.0}; }

  std::size_t classes() const { return singletons.size(); }
  double total() const;
};

// Arbitrary focal sets over 2^Omega. Only used as a reference implementation.
using GeneralMass = std::map<ClassSet, double>;

struct PignisticDist {
  std::vector<double> probs;
};

// Unnormalized conjunctive combination of two singleton+Omega masses.
MassVector combine_simple(const MassVector& mu, const MassVector& m);

// Divides by the total mass. Throws DegenerateEvidence on a zero total.
MassVector normalize(const MassVector& mu);

// Dempster's rule by a double loop over focal sets. Sets must fit in 16 bits.
// Throws NonCombinable under total conflict.
GeneralMass dempster_oracle(const GeneralMass& m1, const GeneralMass& m2);

GeneralMass to_general(const MassVector& m);

// BetP({w_j}) = m({w_j}) + m(Omega) / M. Input must sum to 1 within 1e-6.
PignisticDist pignistic(const MassVector& m);

// Pignistic transform of a general mass over a frame of m classes.
PignisticDist pignistic(const GeneralMass& mass, std::size_t m);

// Logical mass function with the single focal set `focal`.
inline GeneralMass logical_mass(ClassSet focal) { return {{focal, 1.0}}; }

}  // namespace efcn
