//
// Project promptmol - Copyright 2026 the promptmol authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "pmol/molecule_json.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include <json.hpp>

namespace pmol {

using nlohmann::json;

namespace {

[[noreturn]] void bad_field(const std::string& path, const std::string& what) {
  fail_config("molecule json: ", path, ": ", what);
}

double round6(double x) { return std::round(x * 1e6) / 1e6; }

}  // namespace

Molecule parse_molecule_json(const std::string& text, VocabPtr vocab) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    fail_config("molecule json: ", e.what());
  }
  if (!doc.is_object()) bad_field("$", "document must be an object");
  for (const auto& [key, value] : doc.items()) {
    (void)value;
    if (key != "atoms" && key != "bonds" && key != "positions")
      bad_field(key, "unknown field");
  }
  for (const char* key : {"atoms", "bonds", "positions"})
    if (!doc.contains(key)) bad_field(key, "missing field");

  const json& atoms = doc["atoms"];
  if (!atoms.is_array() || atoms.empty())
    bad_field("atoms", "must be a non-empty array of element symbols");
  const int n = static_cast<int>(atoms.size());
  std::vector<int> types(n);
  for (int i = 0; i < n; ++i) {
    const std::string path = "atoms[" + std::to_string(i) + "]";
    if (!atoms[i].is_string()) bad_field(path, "must be a string");
    const int idx = vocab->index_of(atoms[i].get<std::string>());
    if (idx < 0)
      bad_field(path, "unknown element '" + atoms[i].get<std::string>() + "'");
    types[i] = idx;
  }

  const json& positions = doc["positions"];
  if (!positions.is_array() || static_cast<int>(positions.size()) != n)
    bad_field("positions", "must be an array with one [x,y,z] entry per atom");
  Mat pos(n, 3);
  for (int i = 0; i < n; ++i) {
    const std::string path = "positions[" + std::to_string(i) + "]";
    if (!positions[i].is_array() || positions[i].size() != 3)
      bad_field(path, "must be an array of three numbers");
    for (int c = 0; c < 3; ++c) {
      const json& v = positions[i][c];
      if (!v.is_number())
        bad_field(path + "[" + std::to_string(c) + "]", "must be a number");
      pos(i, c) = v.get<double>();
      if (!std::isfinite(pos(i, c)))
        bad_field(path + "[" + std::to_string(c) + "]", "must be finite");
    }
  }

  const json& bonds = doc["bonds"];
  if (!bonds.is_array()) bad_field("bonds", "must be an array");
  Eigen::MatrixXi bond_mat = Eigen::MatrixXi::Constant(n, n, kBondNone);
  std::set<std::pair<int, int>> seen;
  for (int b = 0; b < static_cast<int>(bonds.size()); ++b) {
    const std::string path = "bonds[" + std::to_string(b) + "]";
    const json& entry = bonds[b];
    if (!entry.is_array() || entry.size() != 3)
      bad_field(path, "must be [i, j, category]");
    if (!entry[0].is_number_integer() || !entry[1].is_number_integer())
      bad_field(path, "atom indices must be integers");
    const int i = entry[0].get<int>();
    const int j = entry[1].get<int>();
    if (i < 0 || i >= n || j < 0 || j >= n)
      bad_field(path, "atom index out of range [0," + std::to_string(n) + ")");
    if (i == j) bad_field(path, "bond joins atom " + std::to_string(i) + " to itself");
    if (!entry[2].is_string()) bad_field(path, "category must be a string");
    const int cat = bond_from_name(entry[2].get<std::string>());
    if (cat < 0)
      bad_field(path, "unknown bond category '" + entry[2].get<std::string>() + "'");
    if (cat == kBondNone) bad_field(path, "explicit 'none' bonds are not listed");
    const auto pair = std::minmax(i, j);
    if (!seen.insert(pair).second)
      bad_field(path, "pair (" + std::to_string(pair.first) + "," +
                          std::to_string(pair.second) + ") listed more than once");
    bond_mat(i, j) = cat;
    bond_mat(j, i) = cat;
  }

  return Molecule(std::move(vocab), std::move(types), std::move(bond_mat),
                  std::move(pos));
}

Molecule read_molecule_file(const std::string& path, VocabPtr vocab) {
  std::ifstream in(path);
  if (!in) fail_runtime("cannot open molecule file ", path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  try {
    return parse_molecule_json(text, std::move(vocab));
  } catch (const ConfigError& e) {
    fail_config(path, ": ", e.what());
  }
}

std::string serialize_molecule_json(const Molecule& mol) {
  json doc;
  json atoms = json::array();
  for (int i = 0; i < mol.atom_count(); ++i) atoms.push_back(mol.symbol(i));
  doc["atoms"] = std::move(atoms);

  json bonds = json::array();
  for (int i = 0; i < mol.atom_count(); ++i)
    for (int j = i + 1; j < mol.atom_count(); ++j)
      if (mol.bond(i, j) != kBondNone)
        bonds.push_back(json::array({i, j, bond_name(mol.bond(i, j))}));
  doc["bonds"] = std::move(bonds);

  json positions = json::array();
  for (int i = 0; i < mol.atom_count(); ++i)
    positions.push_back(json::array({round6(mol.positions()(i, 0)),
                                     round6(mol.positions()(i, 1)),
                                     round6(mol.positions()(i, 2))}));
  doc["positions"] = std::move(positions);
  return doc.dump(2) + "\n";
}

void write_molecule_file(const Molecule& mol, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail_runtime("cannot write molecule file ", path);
  out << serialize_molecule_json(mol);
  if (!out) fail_runtime("failed writing molecule file ", path);
}

}  // namespace pmol
