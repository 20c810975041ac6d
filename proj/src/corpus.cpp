//
// Project promptmol - Copyright 2026 the promptmol authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "pmol/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "pmol/molecule_json.hpp"

namespace pmol {
namespace {

namespace fs = std::filesystem;

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::map<std::string, std::map<std::string, double>> read_properties_csv(
    const std::string& path) {
  std::map<std::string, std::map<std::string, double>> table;
  std::ifstream in(path);
  if (!in) return table;  // properties are optional
  std::string line;
  if (!std::getline(in, line)) fail_config(path, ": missing header row");
  std::vector<std::string> header = split_csv_line(line);
  for (auto& h : header) h = trim(h);
  if (header.empty() || header[0] != "id")
    fail_config(path, ": header must start with \"id\"");
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    std::vector<std::string> fields = split_csv_line(line);
    if (fields.size() != header.size())
      fail_config(path, ":", lineno, ": expected ", header.size(),
                  " fields, got ", fields.size());
    std::map<std::string, double> props;
    for (std::size_t c = 1; c < fields.size(); ++c) {
      const std::string value = trim(fields[c]);
      try {
        std::size_t used = 0;
        props[header[c]] = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
      } catch (const std::exception&) {
        fail_config(path, ":", lineno, ": column \"", header[c],
                    "\" is not numeric: \"", value, "\"");
      }
    }
    table[trim(fields[0])] = std::move(props);
  }
  return table;
}

std::string render_template(const std::string& tmpl,
                            const std::string& property) {
  std::string out;
  std::size_t pos = 0;
  while (pos < tmpl.size()) {
    const std::size_t open = tmpl.find('{', pos);
    if (open == std::string::npos) {
      out += tmpl.substr(pos);
      break;
    }
    const std::size_t close = tmpl.find('}', open);
    if (close == std::string::npos)
      fail_config("caption template has an unclosed placeholder: ", tmpl);
    out += tmpl.substr(pos, open - pos);
    const std::string key = tmpl.substr(open + 1, close - open - 1);
    if (key != "property")
      fail_config("unknown caption placeholder {", key, "} in: ", tmpl);
    out += property;
    pos = close + 1;
  }
  return out;
}

}  // namespace

Corpus load_corpus(const std::string& dir, VocabPtr vocab) {
  if (!fs::is_directory(dir)) fail_config("corpus path is not a directory: ", dir);
  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".json")
      files.push_back(entry.path().string());
  std::sort(files.begin(), files.end());

  auto properties = read_properties_csv(dir + "/properties.csv");

  Corpus corpus;
  corpus.vocab = vocab;
  for (const auto& path : files) {
    Molecule mol = read_molecule_file(path, vocab);
    const auto report = validate(mol);
    const std::string id = fs::path(path).stem().string();
    if (!report.is_valid) {
      std::string why;
      for (const auto& reason : report.failure_reasons) {
        if (!why.empty()) why += "; ";
        why += reason;
      }
      log_warn("skipping ", id, ": ", why);
      continue;
    }
    LabeledMolecule item{id, std::move(mol), {}, {}};
    auto it = properties.find(id);
    if (it != properties.end()) item.properties = it->second;
    corpus.items.push_back(std::move(item));
  }
  if (corpus.items.empty()) fail_config("empty corpus in ", dir);
  recompute_marginals(corpus);
  return corpus;
}

void recompute_marginals(Corpus& corpus) {
  if (!corpus.vocab) fail_config("corpus has no vocabulary");
  RowVec atoms = RowVec::Zero(corpus.vocab->size());
  RowVec bonds = RowVec::Zero(kBondCategoryCount);
  for (const auto& item : corpus.items) {
    const Molecule& mol = item.mol;
    for (int i = 0; i < mol.atom_count(); ++i) {
      atoms(mol.atom_type(i)) += 1.0;
      for (int j = i + 1; j < mol.atom_count(); ++j)
        bonds(mol.bond(i, j)) += 1.0;
    }
  }
  corpus.atom_marginal =
      atoms.sum() > 0.0 ? RowVec(atoms / atoms.sum()) : atoms;
  if (bonds.sum() > 0.0) {
    corpus.bond_marginal = bonds / bonds.sum();
  } else {
    corpus.bond_marginal = RowVec::Zero(kBondCategoryCount);
    corpus.bond_marginal(kBondNone) = 1.0;
  }
}

std::map<std::string, double> corpus_property_medians(const Corpus& corpus) {
  std::map<std::string, std::vector<double>> values;
  for (const auto& item : corpus.items)
    for (const auto& [key, value] : item.properties)
      values[key].push_back(value);
  std::map<std::string, double> medians;
  for (auto& [key, v] : values) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    medians[key] = n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  }
  return medians;
}

std::vector<std::string> caption_from_properties(
    const LabeledMolecule& item, const CaptionConfig& config,
    const std::map<std::string, double>& medians) {
  std::vector<std::string> keys = config.properties;
  if (keys.empty())
    for (const auto& [key, value] : item.properties) keys.push_back(key);

  std::vector<std::string> captions;
  for (const auto& key : keys) {
    auto pv = item.properties.find(key);
    if (pv == item.properties.end()) continue;
    double cutoff;
    if (auto th = config.thresholds.find(key); th != config.thresholds.end()) {
      cutoff = th->second;
    } else if (auto md = medians.find(key); md != medians.end()) {
      cutoff = md->second;
    } else {
      fail_config("no threshold or median available for property ", key);
    }
    auto disp = config.display.find(key);
    const std::string phrase = disp == config.display.end() ? key : disp->second;
    if (pv->second > cutoff)
      captions.push_back(render_template(config.high_template, phrase));
    else if (pv->second < cutoff)
      captions.push_back(render_template(config.low_template, phrase));
  }

  // Compound caption in emission order, when the shared prefix allows it.
  const std::string prefix = "This molecule ";
  if (captions.size() >= 2) {
    bool compatible = true;
    std::string joined;
    for (const auto& cap : captions) {
      if (cap.rfind(prefix, 0) != 0) {
        compatible = false;
        break;
      }
      std::string fragment = cap.substr(prefix.size());
      if (!fragment.empty() && fragment.back() == '.') fragment.pop_back();
      joined += (joined.empty() ? "" : " and ") + fragment;
    }
    if (compatible) captions.push_back(prefix + joined + ".");
  }
  return captions;
}

void attach_captions(Corpus& corpus, const CaptionConfig& config) {
  const auto medians = corpus_property_medians(corpus);
  for (auto& item : corpus.items)
    item.captions = caption_from_properties(item, config, medians);
}

SplitResult split_corpus(const Corpus& corpus, double train_fraction,
                         std::uint64_t seed) {
  if (!(train_fraction > 0.0) || train_fraction > 1.0)
    fail_config("train fraction must be in (0, 1], got ", train_fraction);
  std::vector<int> order(corpus.items.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order);
  const auto n_train = static_cast<std::size_t>(
      std::llround(train_fraction * static_cast<double>(order.size())));

  SplitResult out;
  out.train.vocab = corpus.vocab;
  out.validation.vocab = corpus.vocab;
  for (std::size_t k = 0; k < order.size(); ++k)
    (k < n_train ? out.train : out.validation)
        .items.push_back(corpus.items[order[k]]);
  for (Corpus* side : {&out.train, &out.validation}) {
    if (side->items.empty()) {
      side->atom_marginal = RowVec::Zero(corpus.atom_marginal.size());
      side->bond_marginal = RowVec::Zero(corpus.bond_marginal.size());
    } else {
      recompute_marginals(*side);
    }
  }
  return out;
}

}  // namespace pmol
