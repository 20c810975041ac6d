//
// Project promptmol - Copyright 2026 the promptmol authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "pmol/toy_corpus.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <vector>

#include "pmol/metrics.hpp"
#include "pmol/molecule_json.hpp"

namespace pmol {
namespace {

double heavy_bond_length(const std::string& a, const std::string& b) {
  auto key = a < b ? a + b : b + a;
  if (key == "CC") return 1.54;
  if (key == "CN") return 1.47;
  if (key == "CO") return 1.43;
  if (key == "NN") return 1.45;
  if (key == "NO") return 1.40;
  if (key == "OO") return 1.48;
  return 1.5;
}

double hydrogen_bond_length(const std::string& heavy) {
  if (heavy == "C") return 1.09;
  if (heavy == "N") return 1.01;
  return 0.96;
}

Vec3 random_direction(Rng& rng) {
  Vec3 v;
  do {
    v = Vec3(rng.normal(), rng.normal(), rng.normal());
  } while (v.norm() < 1e-6);
  return v / v.norm();
}

int first_valence(const AtomVocabulary& vocab, int type) {
  return static_cast<int>(
      std::llround(vocab.element(type).allowed_valences.front()));
}

}  // namespace

Molecule make_toy_molecule(Rng& rng, VocabPtr vocab,
                           double double_bond_fraction) {
  const int iC = vocab->index_of("C");
  const int iN = vocab->index_of("N");
  const int iO = vocab->index_of("O");
  const int iH = vocab->index_of("H");
  if (iC < 0 || iN < 0 || iO < 0 || iH < 0)
    fail_config("toy corpus needs H, C, N, O in the vocabulary");

  const int heavy = 1 + rng.uniform_int(3);
  std::vector<int> types;
  for (int i = 0; i < heavy; ++i) {
    const double u = rng.uniform();
    types.push_back(u < 0.5 ? iC : (u < 0.75 ? iN : iO));
  }

  // Tree skeleton; independent parent draw per atom.
  std::vector<std::pair<int, int>> edges;
  std::vector<int> order(heavy, 0);  // bond order consumed per atom
  for (int i = 1; i < heavy; ++i) {
    const int parent = rng.uniform_int(i);
    edges.emplace_back(parent, i);
    order[parent] += 1;
    order[i] += 1;
  }
  std::vector<int> categories(edges.size(), kBondSingle);
  for (std::size_t e = 0; e < edges.size(); ++e) {
    auto [p, c] = edges[e];
    const bool carbonyl_shape =
        (types[p] == iC && types[c] == iO) || (types[p] == iO && types[c] == iC);
    if (!carbonyl_shape || rng.uniform() >= double_bond_fraction) continue;
    const int vp = first_valence(*vocab, types[p]);
    const int vc = first_valence(*vocab, types[c]);
    if (order[p] + 1 <= vp && order[c] + 1 <= vc) {
      categories[e] = kBondDouble;
      order[p] += 1;
      order[c] += 1;
    }
  }

  // Positions along the tree, then hydrogens to exact valence.
  Mat heavy_pos = Mat::Zero(heavy, 3);
  for (std::size_t e = 0; e < edges.size(); ++e) {
    auto [p, c] = edges[e];
    const double len = heavy_bond_length(vocab->element(types[p]).symbol,
                                         vocab->element(types[c]).symbol) *
                       (categories[e] == kBondDouble ? 0.87 : 1.0);
    heavy_pos.row(c) = heavy_pos.row(p) + (len * random_direction(rng)).transpose();
  }

  std::vector<int> all_types = types;
  std::vector<std::pair<int, int>> h_edges;
  std::vector<Vec3> h_pos;
  for (int i = 0; i < heavy; ++i) {
    const int missing = first_valence(*vocab, types[i]) - order[i];
    for (int k = 0; k < missing; ++k) {
      const int h_index = static_cast<int>(all_types.size());
      all_types.push_back(iH);
      h_edges.emplace_back(i, h_index);
      h_pos.push_back(Vec3(heavy_pos.row(i).transpose()) +
                      hydrogen_bond_length(vocab->element(types[i]).symbol) *
                          random_direction(rng));
    }
  }

  const int n = static_cast<int>(all_types.size());
  Mat positions(n, 3);
  positions.topRows(heavy) = heavy_pos;
  for (std::size_t k = 0; k < h_pos.size(); ++k)
    positions.row(heavy + static_cast<long>(k)) = h_pos[k];
  positions.rowwise() -= positions.colwise().mean();

  Eigen::MatrixXi bonds = Eigen::MatrixXi::Zero(n, n);
  for (std::size_t e = 0; e < edges.size(); ++e) {
    bonds(edges[e].first, edges[e].second) = categories[e];
    bonds(edges[e].second, edges[e].first) = categories[e];
  }
  for (const auto& [i, h] : h_edges) {
    bonds(i, h) = kBondSingle;
    bonds(h, i) = kBondSingle;
  }
  return Molecule(std::move(vocab), std::move(all_types), std::move(bonds),
                  std::move(positions));
}

void write_toy_corpus(const std::string& dir, const ToyCorpusConfig& config) {
  if (config.count < 1) fail_config("toy corpus count must be >= 1");
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail_runtime("cannot create corpus directory ", dir);

  VocabPtr vocab = AtomVocabulary::default_vocabulary();
  Rng rng(config.seed);
  std::ofstream csv(dir + "/properties.csv");
  if (!csv) fail_runtime("cannot write ", dir, "/properties.csv");
  csv << "id,hbd,hba,logp_proxy,tpsa_proxy,gap\n";
  for (int k = 0; k < config.count; ++k) {
    Molecule mol = make_toy_molecule(rng, vocab, config.double_bond_fraction);
    const auto report = validate(mol);
    if (!report.mol_stable)
      fail_runtime("toy molecule ", k, " is unexpectedly unstable");
    char name[32];
    std::snprintf(name, sizeof(name), "mol_%05d", k);
    write_molecule_file(mol, dir + "/" + name + ".json");
    const int hbd = count_hbd(mol);
    const int hba = count_hba(mol);
    // Synthetic stand-in for a labeled electronic property.
    const double gap = 2.0 + 0.5 * hba - 0.3 * hbd + 0.1 * mol.atom_count();
    csv << name << "," << hbd << "," << hba << "," << logp_proxy(mol) << ","
        << tpsa_proxy(mol) << "," << gap << "\n";
  }
}

}  // namespace pmol
