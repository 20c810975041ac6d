//
// Project promptmol - Copyright 2026 the promptmol authors.
// SPDX-License-Identifier: Apache-2.0
//

#ifndef PMOL_CORPUS_HPP
#define PMOL_CORPUS_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "pmol/molecule.hpp"
#include "pmol/rng.hpp"

namespace pmol {

struct LabeledMolecule {
  std::string id;
  Molecule mol;
  std::map<std::string, double> properties;
  std::vector<std::string> captions;
};

// Items plus the category marginals counted from them.  Atom marginals are
// over the vocabulary; bond marginals are over categories of unordered atom
// pairs (the "none" category included).
struct Corpus {
  VocabPtr vocab;
  std::vector<LabeledMolecule> items;
  RowVec atom_marginal;
  RowVec bond_marginal;
};

// Directory layout: one JSON document per molecule plus properties.csv
// ("id" column first, numeric property columns after).  Molecules that fail
// validity are skipped with a logged reason.
Corpus load_corpus(const std::string& dir, VocabPtr vocab);

void recompute_marginals(Corpus& corpus);

std::map<std::string, double> corpus_property_medians(const Corpus& corpus);

struct CaptionConfig {
  // Captioned property keys in emission order; empty means every property
  // the item carries, in sorted key order.
  std::vector<std::string> properties;
  std::map<std::string, std::string> display;     // key -> phrase
  std::map<std::string, double> thresholds;       // key -> cutoff
  std::string high_template = "This molecule has high {property} value.";
  std::string low_template = "This molecule has low {property} value.";
};

// One sentence per property strictly above/below its cutoff (corpus median
// when no threshold is given); ties emit nothing.  When several sentences
// share the "This molecule " prefix a compound caption joining them with
// "and" is appended.
std::vector<std::string> caption_from_properties(
    const LabeledMolecule& item, const CaptionConfig& config,
    const std::map<std::string, double>& medians);

void attach_captions(Corpus& corpus, const CaptionConfig& config);

struct SplitResult {
  Corpus train;
  Corpus validation;
};

// Deterministic disjoint shuffle split; marginals recomputed per side.
SplitResult split_corpus(const Corpus& corpus, double train_fraction,
                         std::uint64_t seed);

}  // namespace pmol

#endif  // PMOL_CORPUS_HPP
