//
// Project promptmol - Copyright 2026 the promptmol authors.
// SPDX-License-Identifier: Apache-2.0
//

#ifndef PMOL_MOLECULE_JSON_HPP
#define PMOL_MOLECULE_JSON_HPP

#include <string>

#include "pmol/molecule.hpp"

namespace pmol {

// Document schema:
//   {"atoms": ["C", "H", ...],
//    "bonds": [[i, j, "single"], ...],          one entry per unordered pair
//    "positions": [[x, y, z], ...]}             angstroms, 0-based indices
// Parse errors carry the offending field path.
Molecule parse_molecule_json(const std::string& text,
                             VocabPtr vocab = AtomVocabulary::default_vocabulary());

Molecule read_molecule_file(const std::string& path,
                            VocabPtr vocab = AtomVocabulary::default_vocabulary());

// Canonical form: sorted keys, bonds ordered by (i, j) with i < j,
// coordinates rounded to six decimals.  Byte-stable for equal molecules.
std::string serialize_molecule_json(const Molecule& mol);

void write_molecule_file(const Molecule& mol, const std::string& path);

}  // namespace pmol

#endif  // PMOL_MOLECULE_JSON_HPP
