//
// Project promptmol - Copyright 2026 the promptmol authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "pmol/state.hpp"

namespace pmol {

DenseState to_dense_state(const Molecule& mol) {
  const int n = mol.atom_count();
  const int a = mol.vocab().size();
  DenseState s;
  s.H = Mat::Zero(n, a);
  for (int i = 0; i < n; ++i) s.H(i, mol.atom_type(i)) = 1.0;
  s.E = Mat::Zero(n * n, kBondCategoryCount);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      s.E(edge_index(i, j, n), i == j ? kBondNone : mol.bond(i, j)) = 1.0;
  s.P = mol.positions();
  return s;
}

namespace {

int argmax_lowest(const RowVec& row) {
  int best = 0;
  for (int k = 1; k < row.size(); ++k)
    if (row[k] > row[best]) best = k;
  return best;
}

}  // namespace

Molecule decode_state(const DenseState& state, VocabPtr vocab) {
  const int n = state.n();
  check_state_shapes(state, vocab->size(), kBondCategoryCount);
  std::vector<int> types(n);
  for (int i = 0; i < n; ++i) types[i] = argmax_lowest(state.H.row(i));
  Eigen::MatrixXi bonds = Eigen::MatrixXi::Constant(n, n, kBondNone);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const RowVec row = 0.5 * (state.E.row(edge_index(i, j, n)) +
                                state.E.row(edge_index(j, i, n)));
      const int cat = argmax_lowest(row);
      bonds(i, j) = cat;
      bonds(j, i) = cat;
    }
  }
  return Molecule(std::move(vocab), std::move(types), std::move(bonds), state.P);
}

Mat project_rows_zero_mean(const Mat& rows) {
  if (rows.rows() == 0) return rows;
  return rows.rowwise() - rows.colwise().mean();
}

Vec3 center_state_positions(DenseState& state) {
  const Vec3 center = center_of_positions(state.P);
  state.P.rowwise() -= center.transpose();
  return center;
}

void check_state_shapes(const DenseState& state, int atom_width, int bond_width) {
  const int n = state.n();
  if (n == 0) fail_config("state must contain at least one atom");
  if (state.H.rows() != n || state.H.cols() != atom_width)
    fail_config("state H must be ", n, "x", atom_width, ", got ", state.H.rows(),
                "x", state.H.cols());
  if (state.E.rows() != static_cast<long>(n) * n || state.E.cols() != bond_width)
    fail_config("state E must be ", n * n, "x", bond_width, ", got ",
                state.E.rows(), "x", state.E.cols());
  if (state.P.cols() != 3) fail_config("state P must have three columns");
}

}  // namespace pmol
