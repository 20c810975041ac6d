//
// Project promptmol - Copyright 2026 the promptmol authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "pmol/property_tables.hpp"

namespace pmol {

std::vector<ElementSpec> default_element_table() {
  // The 4.5 entry for carbon and 3 for sulfur keep fused and five-membered
  // aromatics stable under the aromatic-order-1.5 convention.
  return {
      {"H", 1.008, {1}},     {"C", 12.011, {4, 4.5}}, {"N", 14.007, {3}},
      {"O", 15.999, {2}},    {"F", 18.998, {1}},      {"P", 30.974, {3, 5}},
      {"S", 32.06, {2, 3, 4, 6}}, {"Cl", 35.45, {1}},  {"Br", 79.904, {1}},
  };
}

const LogPTable& logp_table() {
  static const LogPTable table = [] {
    LogPTable t;
    t.element = {{"C", 0.1441},  {"N", -1.0190}, {"O", -0.2893},
                 {"F", 0.4202},  {"P", 0.8612},  {"S", 0.6482},
                 {"Cl", 0.6895}, {"Br", 0.8456}};
    t.carbon_aromatic = 0.2955;
    t.hydrogen_on_carbon = 0.1230;
    t.hydrogen_on_heteroatom = -0.2677;
    return t;
  }();
  return table;
}

const std::map<std::string, double>& tpsa_table() {
  static const std::map<std::string, double> table = {
      {"N.ar", 12.89}, {"N.ar.h", 15.79}, {"N.tr", 23.79}, {"N.db", 12.36},
      {"N.h0", 3.24},  {"N.h1", 12.03},   {"N.h2", 26.02}, {"O.ar", 13.14},
      {"O.db", 17.07}, {"O.h1", 20.23},   {"O.h0", 9.23},  {"S.ar", 28.24},
      {"S.db", 32.09}, {"S.h1", 38.80},   {"S.h0", 25.30},
  };
  return table;
}

namespace {

bool has_bond_of(const Molecule& mol, int atom, int category) {
  for (int j = 0; j < mol.atom_count(); ++j)
    if (j != atom && mol.bond(atom, j) == category) return true;
  return false;
}

}  // namespace

std::string tpsa_environment_key(const Molecule& mol, int atom) {
  const std::string& sym = mol.symbol(atom);
  if (sym != "N" && sym != "O" && sym != "S") return {};
  const int h = mol.hydrogen_neighbor_count(atom);
  if (has_bond_of(mol, atom, kBondAromatic)) {
    if (sym == "N") return h > 0 ? "N.ar.h" : "N.ar";
    return sym + ".ar";
  }
  if (sym == "N" && has_bond_of(mol, atom, kBondTriple)) return "N.tr";
  if (has_bond_of(mol, atom, kBondDouble)) return sym + ".db";
  if (sym == "N") return h >= 2 ? "N.h2" : (h == 1 ? "N.h1" : "N.h0");
  return sym + (h >= 1 ? ".h1" : ".h0");
}

double logp_atom_contribution(const Molecule& mol, int atom) {
  const LogPTable& t = logp_table();
  const std::string& sym = mol.symbol(atom);
  if (sym == "H") {
    for (int j : mol.neighbors(atom))
      if (mol.symbol(j) != "C" && mol.symbol(j) != "H")
        return t.hydrogen_on_heteroatom;
    return t.hydrogen_on_carbon;
  }
  if (sym == "C" && has_bond_of(mol, atom, kBondAromatic))
    return t.carbon_aromatic;
  auto it = t.element.find(sym);
  if (it == t.element.end())
    fail_config("logp table has no entry for element ", sym);
  return it->second;
}

double tpsa_atom_contribution(const Molecule& mol, int atom) {
  const std::string key = tpsa_environment_key(mol, atom);
  if (key.empty()) return 0.0;
  auto it = tpsa_table().find(key);
  if (it == tpsa_table().end())
    fail_config("tpsa table has no entry for environment ", key);
  return it->second;
}

}  // namespace pmol
