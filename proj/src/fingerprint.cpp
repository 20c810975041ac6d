//
// Project promptmol - Copyright 2026 the promptmol authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "pmol/fingerprint.hpp"

#include <algorithm>

#include "pmol/rng.hpp"

namespace pmol {

namespace {

std::uint64_t hash_string(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) h = hash_combine(h, c);
  return h;
}

}  // namespace

Fingerprint ecfp(const Molecule& mol, int radius) {
  if (radius < 0) fail_config("fingerprint radius must be >= 0, got ", radius);
  const int n = mol.atom_count();
  if (n == 0) fail_config("fingerprint of empty molecule");

  std::vector<int> graph_atoms;
  for (int i = 0; i < n; ++i)
    if (!mol.vocab().is_hydrogen(mol.atom_type(i))) graph_atoms.push_back(i);
  if (graph_atoms.empty())
    for (int i = 0; i < n; ++i) graph_atoms.push_back(i);

  std::vector<char> in_graph(n, 0);
  for (int i : graph_atoms) in_graph[i] = 1;

  // neighbor lists restricted to the hashed graph
  std::vector<std::vector<std::pair<int, int>>> nbrs(n);  // (category, atom)
  for (int i : graph_atoms)
    for (int j : mol.neighbors(i))
      if (in_graph[j]) nbrs[i].push_back({mol.bond(i, j), j});

  Fingerprint fp;
  fp.radius = radius;

  std::vector<std::uint64_t> id(n, 0);
  for (int i : graph_atoms) {
    double order = 0.0;
    for (const auto& [cat, j] : nbrs[i]) {
      (void)j;
      order += bond_order(cat);
    }
    std::uint64_t h = hash_string(mol.symbol(i));
    h = hash_combine(h, static_cast<std::uint64_t>(nbrs[i].size()));
    h = hash_combine(h, static_cast<std::uint64_t>(std::llround(order * 2.0)));
    h = hash_combine(h, static_cast<std::uint64_t>(mol.hydrogen_neighbor_count(i)));
    id[i] = h;
    fp.feature_ids.insert(h);
  }

  for (int r = 1; r <= radius; ++r) {
    std::vector<std::uint64_t> next = id;
    for (int i : graph_atoms) {
      if (nbrs[i].empty()) continue;  // environment cannot grow
      std::vector<std::pair<int, std::uint64_t>> env;
      env.reserve(nbrs[i].size());
      for (const auto& [cat, j] : nbrs[i]) env.push_back({cat, id[j]});
      std::sort(env.begin(), env.end());
      std::uint64_t h = hash_combine(0x9d2c5680a76f3b21ULL, id[i]);
      for (const auto& [cat, nid] : env) {
        h = hash_combine(h, static_cast<std::uint64_t>(cat));
        h = hash_combine(h, nid);
      }
      next[i] = h;
      fp.feature_ids.insert(h);
    }
    id = std::move(next);
  }
  return fp;
}

double tanimoto(const Fingerprint& a, const Fingerprint& b) {
  if (a.radius != b.radius)
    fail_config("tanimoto requires matching radii (", a.radius, " vs ", b.radius, ")");
  if (a.feature_ids.empty() && b.feature_ids.empty()) return 1.0;
  std::size_t common = 0;
  for (std::uint64_t x : a.feature_ids) common += b.feature_ids.count(x);
  const std::size_t unions =
      a.feature_ids.size() + b.feature_ids.size() - common;
  return static_cast<double>(common) / static_cast<double>(unions);
}

}  // namespace pmol
