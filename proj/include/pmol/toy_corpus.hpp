//
// Project promptmol - Copyright 2026 the promptmol authors.
// SPDX-License-Identifier: Apache-2.0
//

#ifndef PMOL_TOY_CORPUS_HPP
#define PMOL_TOY_CORPUS_HPP

#include <cstdint>
#include <string>

#include "pmol/molecule.hpp"
#include "pmol/rng.hpp"

namespace pmol {

// Small saturated C/N/O molecules (1-3 heavy atoms, tree bonds, occasional
// C=O) with every valence filled by explicit hydrogens, so each one is
// stable and valid by construction.  Positions grow along the bond tree at
// standard lengths and are centered.  Total atom count stays <= 12.
struct ToyCorpusConfig {
  int count = 600;
  std::uint64_t seed = 7;
  double double_bond_fraction = 0.25;  // chance a C-O edge becomes C=O
};

Molecule make_toy_molecule(Rng& rng, VocabPtr vocab,
                           double double_bond_fraction = 0.25);

// Writes <dir>/mol_<k>.json plus properties.csv with hbd, hba, logp_proxy,
// tpsa_proxy and a synthetic "gap" label computed from the structure.
void write_toy_corpus(const std::string& dir, const ToyCorpusConfig& config);

}  // namespace pmol

#endif  // PMOL_TOY_CORPUS_HPP
