//
// Project promptmol - Copyright 2026 the promptmol authors.
// SPDX-License-Identifier: Apache-2.0
//

#ifndef PMOL_STATE_HPP
#define PMOL_STATE_HPP

#include "pmol/molecule.hpp"

namespace pmol {

// Relaxed molecule state the diffusion operates on.  Atom and bond rows are
// points on the category simplex (one-hot for clean molecules); bond rows
// are stored for all ordered pairs with edge_index(i, j, n) = i * n + j and
// kept symmetric with a "none" diagonal.
struct DenseState {
  Mat H;  // n x a
  Mat E;  // (n*n) x b
  Mat P;  // n x 3
  int n() const { return static_cast<int>(P.rows()); }
};

inline int edge_index(int i, int j, int n) { return i * n + j; }

DenseState to_dense_state(const Molecule& mol);

// Argmax decode; ties break toward the lowest category index.  Bond rows
// (i, j) and (j, i) are averaged before the argmax, the diagonal is forced
// to "none".
Molecule decode_state(const DenseState& state, VocabPtr vocab);

// Subtract the column mean from every row (center-of-geometry projection).
Mat project_rows_zero_mean(const Mat& rows);

// Center state positions in place; returns the removed center.
Vec3 center_state_positions(DenseState& state);

void check_state_shapes(const DenseState& state, int atom_width, int bond_width);

}  // namespace pmol

#endif  // PMOL_STATE_HPP
