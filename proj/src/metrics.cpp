//
// Project promptmol - Copyright 2026 the promptmol authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "pmol/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "pmol/fingerprint.hpp"
#include "pmol/property_tables.hpp"

namespace pmol {
namespace {

bool is_n_or_o(const Molecule& mol, int i) {
  const std::string& sym = mol.symbol(i);
  return sym == "N" || sym == "O";
}

}  // namespace

int count_hbd(const Molecule& mol) {
  int donors = 0;
  for (int i = 0; i < mol.atom_count(); ++i)
    if (is_n_or_o(mol, i) && mol.hydrogen_neighbor_count(i) >= 1) ++donors;
  return donors;
}

int count_hba(const Molecule& mol, bool include_fluorine) {
  int acceptors = 0;
  for (int i = 0; i < mol.atom_count(); ++i) {
    if (is_n_or_o(mol, i) || (include_fluorine && mol.symbol(i) == "F"))
      ++acceptors;
  }
  return acceptors;
}

double logp_proxy(const Molecule& mol) {
  double sum = 0.0;
  for (int i = 0; i < mol.atom_count(); ++i)
    sum += logp_atom_contribution(mol, i);
  return sum;
}

double tpsa_proxy(const Molecule& mol) {
  double sum = 0.0;
  for (int i = 0; i < mol.atom_count(); ++i)
    sum += tpsa_atom_contribution(mol, i);
  return sum;
}

RowVec PropertyRegressor::descriptors(const Molecule& mol) {
  const AtomVocabulary& vocab = mol.vocab();
  RowVec d = RowVec::Zero(1 + vocab.size() + (kBondCategoryCount - 1) + 6);
  int col = 0;
  d(col++) = 1.0;  // intercept
  for (int i = 0; i < mol.atom_count(); ++i) d(1 + mol.atom_type(i)) += 1.0;
  col = 1 + vocab.size();
  for (int i = 0; i < mol.atom_count(); ++i)
    for (int j = i + 1; j < mol.atom_count(); ++j)
      if (mol.bond(i, j) != kBondNone) d(col + mol.bond(i, j) - 1) += 1.0;
  col += kBondCategoryCount - 1;
  d(col++) = count_hbd(mol);
  d(col++) = count_hba(mol);
  d(col++) = logp_proxy(mol);
  d(col++) = tpsa_proxy(mol);
  d(col++) = mol.atom_count();
  int heavy = 0;
  for (int i = 0; i < mol.atom_count(); ++i)
    if (!vocab.is_hydrogen(mol.atom_type(i))) ++heavy;
  d(col++) = heavy;
  return d;
}

PropertyRegressor PropertyRegressor::fit(
    const std::vector<LabeledMolecule>& items, const std::string& label,
    double ridge) {
  std::vector<const LabeledMolecule*> usable;
  for (const auto& item : items)
    if (item.properties.count(label)) usable.push_back(&item);
  if (usable.size() < 2)
    fail_config("need at least 2 labeled items to fit \"", label, "\", got ",
                usable.size());
  const long d = PropertyRegressor::descriptors(usable[0]->mol).size();
  Mat X(static_cast<long>(usable.size()), d);
  Vec y(static_cast<long>(usable.size()));
  for (std::size_t r = 0; r < usable.size(); ++r) {
    X.row(static_cast<long>(r)) = descriptors(usable[r]->mol);
    y(static_cast<long>(r)) = usable[r]->properties.at(label);
  }
  Mat gram = X.transpose() * X;
  for (long k = 1; k < d; ++k) gram(k, k) += ridge;  // intercept unpenalized
  PropertyRegressor out;
  out.label_ = label;
  out.coefficients_ = gram.ldlt().solve(X.transpose() * y);
  if (!out.coefficients_.allFinite())
    fail_runtime("ridge fit for \"", label, "\" produced non-finite weights");
  return out;
}

double PropertyRegressor::predict(const Molecule& mol) const {
  const RowVec d = descriptors(mol);
  if (d.size() != coefficients_.size())
    fail_runtime("descriptor width ", d.size(), " does not match the fit (",
                 coefficients_.size(), ")");
  return d * coefficients_;
}

EvaluatorFn make_evaluator(
    const PropertySpec& spec,
    const std::map<std::string, PropertyRegressor>& regressors) {
  if (spec.evaluator == "hbd")
    return [](const Molecule& m) { return static_cast<double>(count_hbd(m)); };
  if (spec.evaluator == "hba")
    return [](const Molecule& m) { return static_cast<double>(count_hba(m)); };
  if (spec.evaluator == "logp_proxy")
    return [](const Molecule& m) { return logp_proxy(m); };
  if (spec.evaluator == "tpsa_proxy")
    return [](const Molecule& m) { return tpsa_proxy(m); };
  if (spec.evaluator == "regressor") {
    auto it = regressors.find(spec.label);
    if (it == regressors.end())
      fail_config("no fitted regressor for label \"", spec.label, "\"");
    const PropertyRegressor* r = &it->second;
    return [r](const Molecule& m) { return r->predict(m); };
  }
  fail_config("unknown evaluator \"", spec.evaluator, "\"");
}

HitReport evaluate_hits(
    const std::vector<Molecule>& inputs, const std::vector<Molecule>& outputs,
    const std::vector<PropertySpec>& specs,
    const std::map<std::string, PropertyRegressor>& regressors) {
  if (inputs.size() != outputs.size())
    fail_config("inputs (", inputs.size(), ") and outputs (", outputs.size(),
                ") must align by index");
  if (inputs.empty()) fail_config("nothing to evaluate");
  if (specs.empty()) fail_config("no property specs given");
  std::vector<EvaluatorFn> evals;
  for (const auto& spec : specs) {
    if (spec.direction != "increase" && spec.direction != "decrease")
      fail_config("unknown direction \"", spec.direction, "\" for ",
                  spec.name);
    evals.push_back(make_evaluator(spec, regressors));
  }

  HitReport report;
  report.hits.assign(inputs.size(), 0);
  std::map<std::string, int> satisfied;
  int valid_count = 0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const bool valid = validate(outputs[k]).is_valid;
    if (valid) ++valid_count;
    bool all = true;
    for (std::size_t s = 0; s < specs.size(); ++s) {
      const double before = evals[s](inputs[k]);
      const double after = evals[s](outputs[k]);
      const double gain = specs[s].direction == "increase" ? after - before
                                                           : before - after;
      const bool ok = gain > specs[s].threshold;
      if (ok) satisfied[specs[s].name] += 1;
      all = all && ok;
    }
    report.hits[k] = (valid && all) ? 1 : 0;
  }
  const double n = static_cast<double>(inputs.size());
  report.hit_ratio =
      std::accumulate(report.hits.begin(), report.hits.end(), 0) / n;
  report.validity_ratio = valid_count / n;
  for (const auto& spec : specs)
    report.per_property[spec.name] = satisfied[spec.name] / n;
  return report;
}

HitReport aggregate_any_hit(const std::vector<HitReport>& runs) {
  if (runs.empty()) fail_config("no runs to aggregate");
  const std::size_t n = runs[0].hits.size();
  for (const auto& run : runs)
    if (run.hits.size() != n)
      fail_config("runs disagree on the number of evaluated pairs");
  HitReport out;
  out.hits.assign(n, 0);
  double validity = 0.0;
  for (const auto& run : runs) {
    validity = std::max(validity, run.validity_ratio);
    for (std::size_t k = 0; k < n; ++k)
      out.hits[k] = out.hits[k] | run.hits[k];
  }
  out.hit_ratio =
      std::accumulate(out.hits.begin(), out.hits.end(), 0) /
      static_cast<double>(n);
  out.validity_ratio = validity;
  return out;
}

double total_variation(const RowVec& p, const RowVec& q) {
  if (p.size() != q.size()) fail_config("total variation width mismatch");
  return 0.5 * (p - q).cwiseAbs().sum();
}

double wasserstein1(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty())
    fail_config("Wasserstein distance needs non-empty samples");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  // Integrate |F_a - F_b| over the merged support.
  std::vector<double> cuts;
  cuts.reserve(a.size() + b.size());
  cuts.insert(cuts.end(), a.begin(), a.end());
  cuts.insert(cuts.end(), b.begin(), b.end());
  std::sort(cuts.begin(), cuts.end());
  double w1 = 0.0;
  std::size_t ia = 0, ib = 0;
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    while (ia < a.size() && a[ia] <= cuts[k]) ++ia;
    while (ib < b.size() && b[ib] <= cuts[k]) ++ib;
    const double fa = static_cast<double>(ia) / a.size();
    const double fb = static_cast<double>(ib) / b.size();
    w1 += std::abs(fa - fb) * (cuts[k + 1] - cuts[k]);
  }
  return w1;
}

GenerationMetrics generation_metrics(const std::vector<Molecule>& samples,
                                     const Corpus& corpus) {
  if (samples.empty()) fail_config("no samples to score");
  GenerationMetrics m;
  double atom_stable_sum = 0.0;
  int mol_stable = 0, valid = 0;
  std::set<std::set<std::uint64_t>> distinct;
  RowVec atom_counts = RowVec::Zero(corpus.atom_marginal.size());
  RowVec bond_counts = RowVec::Zero(corpus.bond_marginal.size());
  std::map<int, std::vector<double>> sample_lengths;

  for (const Molecule& mol : samples) {
    const auto report = validate(mol);
    atom_stable_sum += report.atom_stable_fraction;
    if (report.mol_stable) ++mol_stable;
    if (report.is_valid) ++valid;
    distinct.insert(ecfp(mol).feature_ids);
    for (int i = 0; i < mol.atom_count(); ++i) {
      atom_counts(mol.atom_type(i)) += 1.0;
      for (int j = i + 1; j < mol.atom_count(); ++j) {
        bond_counts(mol.bond(i, j)) += 1.0;
        if (mol.bond(i, j) != kBondNone)
          sample_lengths[mol.bond(i, j)].push_back(
              (mol.positions().row(i) - mol.positions().row(j)).norm());
      }
    }
  }

  std::map<int, std::vector<double>> corpus_lengths;
  for (const auto& item : corpus.items) {
    const Molecule& mol = item.mol;
    for (int i = 0; i < mol.atom_count(); ++i)
      for (int j = i + 1; j < mol.atom_count(); ++j)
        if (mol.bond(i, j) != kBondNone)
          corpus_lengths[mol.bond(i, j)].push_back(
              (mol.positions().row(i) - mol.positions().row(j)).norm());
  }

  const double n = static_cast<double>(samples.size());
  m.mol_stable_fraction = mol_stable / n;
  m.atom_stable_fraction = atom_stable_sum / n;
  m.validity = valid / n;
  m.uniqueness = static_cast<double>(distinct.size()) / n;
  if (atom_counts.sum() > 0.0)
    m.atom_tv = total_variation(atom_counts / atom_counts.sum(),
                                corpus.atom_marginal);
  if (bond_counts.sum() > 0.0)
    m.bond_tv = total_variation(bond_counts / bond_counts.sum(),
                                corpus.bond_marginal);
  for (const auto& [cat, lengths] : sample_lengths) {
    auto it = corpus_lengths.find(cat);
    if (it == corpus_lengths.end()) continue;
    m.bond_length_w1[cat] = wasserstein1(lengths, it->second);
  }
  return m;
}

}  // namespace pmol
