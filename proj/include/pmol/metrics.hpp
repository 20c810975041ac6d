//
// Project promptmol - Copyright 2026 the promptmol authors.
// SPDX-License-Identifier: Apache-2.0
//

#ifndef PMOL_METRICS_HPP
#define PMOL_METRICS_HPP

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "pmol/corpus.hpp"

namespace pmol {

// Donors: N or O atoms with at least one bonded hydrogen.  Acceptors: N or
// O atoms (fluorine optionally included).  Both are permutation and
// rigid-motion invariant.
int count_hbd(const Molecule& mol);
int count_hba(const Molecule& mol, bool include_fluorine = false);

// Additive atomic-contribution sums over the shipped tables.
double logp_proxy(const Molecule& mol);
double tpsa_proxy(const Molecule& mol);

struct PropertySpec {
  std::string name;
  std::string evaluator;  // hbd | hba | logp_proxy | tpsa_proxy | regressor
  std::string direction = "increase";  // increase | decrease
  double threshold = 0.0;              // improvements must exceed this
  std::string label;                   // regressor: corpus property column
};

// Ridge regression on cheap structural descriptors, standing in for labeled
// properties the structure alone cannot provide.
class PropertyRegressor {
 public:
  static PropertyRegressor fit(const std::vector<LabeledMolecule>& items,
                               const std::string& label,
                               double ridge = 1e-3);
  double predict(const Molecule& mol) const;
  const std::string& label() const { return label_; }

  static RowVec descriptors(const Molecule& mol);

 private:
  std::string label_;
  Vec coefficients_;
};

using EvaluatorFn = std::function<double(const Molecule&)>;
EvaluatorFn make_evaluator(
    const PropertySpec& spec,
    const std::map<std::string, PropertyRegressor>& regressors);

struct HitReport {
  std::vector<int> hits;  // 0/1 per pair
  double hit_ratio = 0.0;
  double validity_ratio = 0.0;
  std::map<std::string, double> per_property;  // satisfaction fraction
};

// hit = output valid AND every spec improved beyond its threshold (strict
// inequality, so a tie never counts).
HitReport evaluate_hits(
    const std::vector<Molecule>& inputs, const std::vector<Molecule>& outputs,
    const std::vector<PropertySpec>& specs,
    const std::map<std::string, PropertyRegressor>& regressors = {});

// Any-hit pooling across runs on the same inputs: pair i hits when any run
// hit it.
HitReport aggregate_any_hit(const std::vector<HitReport>& runs);

struct GenerationMetrics {
  double mol_stable_fraction = 0.0;
  double atom_stable_fraction = 0.0;
  double validity = 0.0;
  double uniqueness = 0.0;  // distinct fingerprints / samples
  double atom_tv = 0.0;     // total variation to the corpus atom marginal
  double bond_tv = 0.0;
  // Per bond category (single..aromatic), 1-Wasserstein distance between
  // sample and corpus bond-length distributions; categories missing on
  // either side are absent.
  std::map<int, double> bond_length_w1;
};

GenerationMetrics generation_metrics(const std::vector<Molecule>& samples,
                                     const Corpus& corpus);

double total_variation(const RowVec& p, const RowVec& q);
double wasserstein1(std::vector<double> a, std::vector<double> b);

}  // namespace pmol

#endif  // PMOL_METRICS_HPP
