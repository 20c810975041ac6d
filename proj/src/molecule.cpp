//
// Project promptmol - Copyright 2026 the promptmol authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "pmol/molecule.hpp"

#include <algorithm>
#include <cmath>

#include "pmol/property_tables.hpp"

namespace pmol {

namespace {
const std::string kBondNames[kBondCategoryCount] = {"none", "single", "double",
                                                    "triple", "aromatic"};
const double kBondOrders[kBondCategoryCount] = {0.0, 1.0, 2.0, 3.0, 1.5};
constexpr double kValenceTol = 1e-9;
}  // namespace

double bond_order(int category) {
  if (category < 0 || category >= kBondCategoryCount)
    fail_config("unknown bond category index ", category);
  return kBondOrders[category];
}

const std::string& bond_name(int category) {
  if (category < 0 || category >= kBondCategoryCount)
    fail_config("unknown bond category index ", category);
  return kBondNames[category];
}

int bond_from_name(const std::string& name) {
  for (int k = 0; k < kBondCategoryCount; ++k)
    if (kBondNames[k] == name) return k;
  return -1;
}

AtomVocabulary::AtomVocabulary(std::vector<ElementSpec> elements)
    : elements_(std::move(elements)) {
  if (elements_.empty()) fail_config("atom vocabulary must not be empty");
  for (int i = 0; i < static_cast<int>(elements_.size()); ++i) {
    const ElementSpec& e = elements_[i];
    if (e.symbol.empty()) fail_config("vocabulary element ", i, " has empty symbol");
    if (e.allowed_valences.empty())
      fail_config("vocabulary element ", e.symbol, " has no allowed valences");
    if (!by_symbol_.emplace(e.symbol, i).second)
      fail_config("vocabulary lists element ", e.symbol, " twice");
  }
}

std::shared_ptr<const AtomVocabulary> AtomVocabulary::default_vocabulary() {
  static const std::shared_ptr<const AtomVocabulary> vocab =
      std::make_shared<AtomVocabulary>(default_element_table());
  return vocab;
}

int AtomVocabulary::index_of(const std::string& symbol) const {
  auto it = by_symbol_.find(symbol);
  return it == by_symbol_.end() ? -1 : it->second;
}

const ElementSpec& AtomVocabulary::element(int idx) const {
  if (idx < 0 || idx >= size()) fail_config("element index ", idx, " out of range");
  return elements_[idx];
}

bool AtomVocabulary::is_hydrogen(int idx) const {
  return element(idx).symbol == "H";
}

Molecule::Molecule(VocabPtr vocab, std::vector<int> atom_types,
                   Eigen::MatrixXi bonds, Mat positions)
    : vocab_(std::move(vocab)),
      atom_types_(std::move(atom_types)),
      bonds_(std::move(bonds)),
      positions_(std::move(positions)) {
  if (!vocab_) fail_config("molecule requires a vocabulary");
  const int n = atom_count();
  for (int i = 0; i < n; ++i)
    if (atom_types_[i] < 0 || atom_types_[i] >= vocab_->size())
      fail_config("atom ", i, " has type index ", atom_types_[i],
                  " outside the vocabulary");
  if (bonds_.rows() != n || bonds_.cols() != n)
    fail_config("bond matrix must be ", n, "x", n, ", got ", bonds_.rows(), "x",
                bonds_.cols());
  for (int i = 0; i < n; ++i) {
    if (bonds_(i, i) != kBondNone)
      fail_config("bond matrix diagonal must be 'none' (atom ", i, ")");
    for (int j = 0; j < n; ++j) {
      if (bonds_(i, j) < 0 || bonds_(i, j) >= kBondCategoryCount)
        fail_config("bond (", i, ",", j, ") has unknown category ", bonds_(i, j));
      if (bonds_(i, j) != bonds_(j, i))
        fail_config("bond matrix must be symmetric; (", i, ",", j, ") differs");
    }
  }
  if (positions_.rows() != n || positions_.cols() != 3)
    fail_config("positions must be ", n, "x3, got ", positions_.rows(), "x",
                positions_.cols());
  if (!positions_.allFinite()) fail_config("positions must be finite");
}

const std::string& Molecule::symbol(int i) const {
  return vocab_->element(atom_type(i)).symbol;
}

void Molecule::set_positions(Mat p) {
  if (p.rows() != atom_count() || p.cols() != 3 || !p.allFinite())
    fail_config("positions must be ", atom_count(), "x3 and finite");
  positions_ = std::move(p);
}

double Molecule::valence_order(int i) const {
  double total = 0.0;
  for (int j = 0; j < atom_count(); ++j)
    if (j != i) total += bond_order(bonds_(i, j));
  return total;
}

int Molecule::hydrogen_neighbor_count(int i) const {
  int count = 0;
  for (int j : neighbors(i))
    if (vocab_->is_hydrogen(atom_type(j))) ++count;
  return count;
}

std::vector<int> Molecule::neighbors(int i) const {
  std::vector<int> out;
  for (int j = 0; j < atom_count(); ++j)
    if (j != i && bonds_(i, j) != kBondNone) out.push_back(j);
  return out;
}

bool Molecule::is_connected() const {
  const int n = atom_count();
  if (n == 0) return false;
  std::vector<char> seen(n, 0);
  std::vector<int> stack{0};
  seen[0] = 1;
  int reached = 1;
  while (!stack.empty()) {
    const int i = stack.back();
    stack.pop_back();
    for (int j : neighbors(i)) {
      if (!seen[j]) {
        seen[j] = 1;
        ++reached;
        stack.push_back(j);
      }
    }
  }
  return reached == n;
}

ValidityReport validate(const Molecule& mol) {
  const int n = mol.atom_count();
  if (n == 0) fail_config("validate rejects empty molecule (n=0)");
  ValidityReport report;
  int stable = 0;
  bool over_max = false;
  for (int i = 0; i < n; ++i) {
    const ElementSpec& e = mol.vocab().element(mol.atom_type(i));
    const double order = mol.valence_order(i);
    bool atom_ok = false;
    double max_allowed = 0.0;
    for (double v : e.allowed_valences) {
      max_allowed = std::max(max_allowed, v);
      if (std::abs(order - v) <= kValenceTol) atom_ok = true;
    }
    if (atom_ok) {
      ++stable;
    } else {
      std::ostringstream os;
      os << "atom " << i << " (" << e.symbol << ") has valence order " << order;
      report.failure_reasons.push_back(os.str());
    }
    if (order > max_allowed + kValenceTol) over_max = true;
  }
  report.atom_stable_fraction = static_cast<double>(stable) / n;
  report.mol_stable = (stable == n);
  const bool connected = mol.is_connected();
  if (!connected) report.failure_reasons.push_back("bond graph is disconnected");
  if (over_max) report.failure_reasons.push_back("valence above element maximum");
  report.is_valid = connected && !over_max;
  return report;
}

Vec3 center_of_mass(const Molecule& mol, bool mass_weighted) {
  const int n = mol.atom_count();
  if (n == 0) fail_config("center of mass of empty molecule");
  Vec3 acc = Vec3::Zero();
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    const double w = mass_weighted ? mol.vocab().element(mol.atom_type(i)).mass : 1.0;
    acc += w * mol.positions().row(i).transpose();
    total += w;
  }
  return acc / total;
}

Vec3 center_of_positions(const Mat& positions) {
  if (positions.rows() == 0) fail_config("center of empty position set");
  return positions.colwise().mean().transpose();
}

Molecule apply_rigid_motion(const Molecule& mol, const Mat3& rotation,
                            const Vec3& translation) {
  const double defect = (rotation.transpose() * rotation - Mat3::Identity())
                            .cwiseAbs()
                            .maxCoeff();
  if (defect > 1e-10)
    fail_config("rigid motion requires an orthogonal matrix (defect ", defect, ")");
  Mat moved = mol.positions() * rotation.transpose();
  moved.rowwise() += translation.transpose();
  return Molecule(mol.vocab_ptr(), mol.atom_types(), mol.bonds(), std::move(moved));
}

}  // namespace pmol
