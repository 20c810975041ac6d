//
// Project promptmol - Copyright 2026 the promptmol authors.
// SPDX-License-Identifier: Apache-2.0
//

#ifndef PMOL_PROPERTY_TABLES_HPP
#define PMOL_PROPERTY_TABLES_HPP

#include <map>
#include <string>
#include <vector>

#include "pmol/molecule.hpp"

namespace pmol {

// Compiled copies of the tables under data/.  The JSON files are the
// documented source of record; a unit test keeps the two in sync.
std::vector<ElementSpec> default_element_table();

struct LogPTable {
  std::map<std::string, double> element;  // heavy atoms by symbol
  double carbon_aromatic = 0.0;           // overrides C on aromatic carbons
  double hydrogen_on_carbon = 0.0;
  double hydrogen_on_heteroatom = 0.0;
};
const LogPTable& logp_table();

// Polar-surface contributions keyed by environment, e.g. "O.h1" for a
// hydroxyl oxygen or "N.ar" for an aromatic nitrogen without hydrogens.
const std::map<std::string, double>& tpsa_table();

// Environment key for an atom, empty when the element never contributes.
std::string tpsa_environment_key(const Molecule& mol, int atom);

double logp_atom_contribution(const Molecule& mol, int atom);
double tpsa_atom_contribution(const Molecule& mol, int atom);

}  // namespace pmol

#endif  // PMOL_PROPERTY_TABLES_HPP
