//
// Project promptmol - Copyright 2026 the promptmol authors.
// SPDX-License-Identifier: Apache-2.0
//

#ifndef PMOL_FINGERPRINT_HPP
#define PMOL_FINGERPRINT_HPP

#include <cstdint>
#include <set>

#include "pmol/molecule.hpp"

namespace pmol {

struct Fingerprint {
  int radius = 0;
  std::set<std::uint64_t> feature_ids;
};

// Circular substructure fingerprint.  Environments are hashed over the
// heavy-atom graph; hydrogens enter through the per-atom attached-H count
// (molecules without heavy atoms fall back to the full graph).  The initial
// invariant is (element, heavy degree, heavy bond-order sum, H count); each
// radius folds the sorted (bond category, neighbor id) list into a new id.
// Atoms without neighbors stop emitting beyond radius 0.
Fingerprint ecfp(const Molecule& mol, int radius = 2);

// |A intersect B| / |A union B|; 1.0 when both sets are empty.
// Radii must match.
double tanimoto(const Fingerprint& a, const Fingerprint& b);

}  // namespace pmol

#endif  // PMOL_FINGERPRINT_HPP
