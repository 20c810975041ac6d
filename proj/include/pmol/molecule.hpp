//
// Project promptmol - Copyright 2026 the promptmol authors.
// SPDX-License-Identifier: Apache-2.0
//

#ifndef PMOL_MOLECULE_HPP
#define PMOL_MOLECULE_HPP

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "pmol/common.hpp"

namespace pmol {

// Bond categories form a fixed closed set; index 0 is the explicit
// "no bond" category the categorical diffusion operates over.
inline constexpr int kBondNone = 0;
inline constexpr int kBondSingle = 1;
inline constexpr int kBondDouble = 2;
inline constexpr int kBondTriple = 3;
inline constexpr int kBondAromatic = 4;
inline constexpr int kBondCategoryCount = 5;

// Order used in valence sums; aromatic counts as 1.5.
double bond_order(int category);
const std::string& bond_name(int category);
int bond_from_name(const std::string& name);  // -1 when unknown

struct ElementSpec {
  std::string symbol;
  double mass = 0.0;
  std::vector<double> allowed_valences;
};

class AtomVocabulary {
 public:
  explicit AtomVocabulary(std::vector<ElementSpec> elements);

  // H, C, N, O, F, P, S, Cl, Br with the shipped valence table.
  static std::shared_ptr<const AtomVocabulary> default_vocabulary();

  int size() const { return static_cast<int>(elements_.size()); }
  int index_of(const std::string& symbol) const;  // -1 when unknown
  const ElementSpec& element(int idx) const;
  bool is_hydrogen(int idx) const;

 private:
  std::vector<ElementSpec> elements_;
  std::map<std::string, int> by_symbol_;
};

using VocabPtr = std::shared_ptr<const AtomVocabulary>;

// Value type holding atom types (vocabulary indices), a symmetric bond
// category matrix with a "none" diagonal, and positions in angstroms.
class Molecule {
 public:
  Molecule(VocabPtr vocab, std::vector<int> atom_types, Eigen::MatrixXi bonds,
           Mat positions);

  int atom_count() const { return static_cast<int>(atom_types_.size()); }
  int atom_type(int i) const { return atom_types_.at(i); }
  const std::vector<int>& atom_types() const { return atom_types_; }
  const std::string& symbol(int i) const;
  int bond(int i, int j) const { return bonds_(i, j); }
  const Eigen::MatrixXi& bonds() const { return bonds_; }
  const Mat& positions() const { return positions_; }
  void set_positions(Mat p);
  const AtomVocabulary& vocab() const { return *vocab_; }
  const VocabPtr& vocab_ptr() const { return vocab_; }

  double valence_order(int i) const;
  int hydrogen_neighbor_count(int i) const;
  std::vector<int> neighbors(int i) const;  // atoms joined by a real bond
  bool is_connected() const;                // single component; n = 1 counts

 private:
  VocabPtr vocab_;
  std::vector<int> atom_types_;
  Eigen::MatrixXi bonds_;
  Mat positions_;
};

struct ValidityReport {
  bool is_valid = false;
  bool mol_stable = false;
  double atom_stable_fraction = 0.0;
  std::vector<std::string> failure_reasons;
};

// Stability: an atom is stable when its valence order matches one of the
// allowed values for its element.  Validity additionally requires a single
// connected component and no valence above the element maximum.
ValidityReport validate(const Molecule& mol);

Vec3 center_of_mass(const Molecule& mol, bool mass_weighted = false);
Vec3 center_of_positions(const Mat& positions);

// P' = P R^T + t; R must be orthogonal within 1e-10.
Molecule apply_rigid_motion(const Molecule& mol, const Mat3& rotation,
                            const Vec3& translation);

}  // namespace pmol

#endif  // PMOL_MOLECULE_HPP
