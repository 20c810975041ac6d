//
// Project promptmol - Copyright 2026 the promptmol authors.
// SPDX-License-Identifier: Apache-2.0
//

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "pmol/align.hpp"
#include "pmol/toy_corpus.hpp"
#include "reference_molecules.hpp"

using namespace pmol;
namespace ref = pmol::testref;
namespace fs = std::filesystem;

namespace {

CoreWidths tiny_widths() {
  CoreWidths w;
  w.layers = 1;
  w.d_node = 16;
  w.d_edge = 8;
  w.d_pos = 8;
  w.atom_width =
      static_cast<int>(AtomVocabulary::default_vocabulary()->size());
  w.bond_width = kBondCategoryCount;
  return w;
}

AlignConfig tiny_align_config() {
  AlignConfig config;
  config.mol_widths = tiny_widths();
  config.d_align = 12;
  config.d_text = 10;
  return config;
}

DenseState centered_state(const Molecule& mol) {
  DenseState state = to_dense_state(mol);
  center_state_positions(state);
  return state;
}

std::vector<std::string> sorted_words(const std::vector<std::string>& texts) {
  std::vector<std::string> words;
  for (const auto& text : texts)
    for (const auto& word : tokenize(text)) words.push_back(word);
  std::sort(words.begin(), words.end());
  return words;
}

std::vector<std::pair<DenseState, std::string>> toy_pairs(int count,
                                                          std::uint64_t seed) {
  Rng rng(seed);
  VocabPtr vocab = AtomVocabulary::default_vocabulary();
  std::vector<std::pair<DenseState, std::string>> pairs;
  const char* phrases[] = {
      "This molecule has high hydrogen bond donor count value.",
      "This molecule has low hydrogen bond donor count value.",
      "This molecule has high gap value.",
      "This molecule has low gap value."};
  for (int k = 0; k < count; ++k) {
    Molecule mol = make_toy_molecule(rng, vocab, 0.2);
    pairs.push_back({centered_state(mol), phrases[k % 4]});
  }
  return pairs;
}

}  // namespace

TEST_SUITE("align") {

TEST_CASE("tokenization lowercases and splits on punctuation") {
  CHECK(tokenize("This molecule is SOLUBLE, very soluble!") ==
        std::vector<std::string>{"this", "molecule", "is", "soluble", "very",
                                 "soluble"});
  CHECK(tokenize("").empty());
  CHECK(tokenize("  .,;  ").empty());
  CHECK(tokenize("pKa=4.5") == std::vector<std::string>{"pka", "4", "5"});
}

TEST_CASE("identity splitting keeps single clauses whole") {
  const PromptSplit whole = split_identities("This molecule is soluble.");
  CHECK(whole.identities.empty());

  const PromptSplit split = split_identities(
      "This molecule has high polarity, and low molecular weight.");
  CHECK(split.identities.size() == 2);

  // The split conserves the prompt's word multiset.
  std::vector<std::string> prompt_words = sorted_words(
      {"This molecule has high polarity, and low molecular weight."});
  std::vector<std::string> pieces = split.identities;
  pieces.insert(pieces.end(), split.connectives.begin(),
                split.connectives.end());
  CHECK(sorted_words(pieces) == prompt_words);
}

TEST_CASE("text vocabulary maps unknown words to the zero slot") {
  TextVocab vocab =
      TextVocab::build({"high donor count", "low donor count"});
  CHECK(vocab.id_of("donor") >= 1);
  CHECK(vocab.id_of("unseen") == 0);
  CHECK(vocab.size() == static_cast<int>(vocab.words().size()) + 1);
  const int first = vocab.id_of("count");
  CHECK(vocab.id_of("count") == first);
}

TEST_CASE("embeddings live on the unit sphere") {
  Rng rng(601);
  TextVocab vocab = TextVocab::build({"high donor", "low donor"});
  AlignmentModel model(tiny_align_config(), vocab, rng);
  const RowVec text = model.embed_text("high donor");
  CHECK(text.norm() == doctest::Approx(1.0).epsilon(1e-9));
  const DenseState state = centered_state(ref::ethanol());
  const RowVec mol = model.embed_molecule(state);
  CHECK(mol.norm() == doctest::Approx(1.0).epsilon(1e-9));
  const double score = model.alignment_score(state, text);
  CHECK(score == doctest::Approx(mol.dot(text)));
  CHECK(score >= -1.0);
  CHECK(score <= 1.0);
}

TEST_CASE("molecule embeddings ignore atom order and rigid rotations") {
  Rng rng(602);
  TextVocab vocab = TextVocab::build({"anything"});
  AlignmentModel model(tiny_align_config(), vocab, rng);
  Molecule mol = ref::ethanol();
  const RowVec base = model.embed_molecule(centered_state(mol));

  std::vector<int> perm(mol.atom_count());
  for (int i = 0; i < mol.atom_count(); ++i)
    perm[i] = (i + 3) % mol.atom_count();
  const int n = mol.atom_count();
  std::vector<int> types(n);
  Eigen::MatrixXi bonds = Eigen::MatrixXi::Zero(n, n);
  Mat pos(n, 3);
  for (int i = 0; i < n; ++i) {
    types[perm[i]] = mol.atom_type(i);
    pos.row(perm[i]) = mol.positions().row(i);
  }
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) bonds(perm[i], perm[j]) = mol.bond(i, j);
  Molecule shuffled(mol.vocab_ptr(), types, bonds, pos);
  const RowVec permuted = model.embed_molecule(centered_state(shuffled));
  CHECK((permuted - base).cwiseAbs().maxCoeff() == 0.0);

  Mat3 rot;
  const double a = 0.9;
  rot << std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a), 0, 0, 0, 1;
  Molecule rotated = apply_rigid_motion(mol, rot, Vec3::Zero());
  const RowVec turned = model.embed_molecule(centered_state(rotated));
  CHECK((turned - base).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("fresh contrastive loss sits near the batch-size logarithm") {
  Rng rng(603);
  auto pairs = toy_pairs(8, 604);
  std::vector<std::string> texts;
  for (const auto& [state, text] : pairs) texts.push_back(text);
  TextVocab vocab = TextVocab::build(texts);
  AlignmentModel model(tiny_align_config(), vocab, rng);
  AlignTrainConfig config;
  config.epochs = 1;
  config.batch_size = 8;
  config.adam.lr = 1e-4;
  Rng train_rng(605);
  const auto history = train_contrastive(model, pairs, config, train_rng);
  REQUIRE(history.size() == 1);
  CHECK(std::abs(history[0].mean_loss - std::log(8.0)) < 0.3);
}

TEST_CASE("contrastive training improves matched-pair scores") {
  Rng rng(606);
  auto pairs = toy_pairs(12, 607);
  std::vector<std::string> texts;
  for (const auto& [state, text] : pairs) texts.push_back(text);
  TextVocab vocab = TextVocab::build(texts);
  AlignmentModel model(tiny_align_config(), vocab, rng);

  auto matched_mean = [&]() {
    double total = 0.0;
    for (const auto& [state, text] : pairs)
      total += model.alignment_score(state, model.embed_text(text));
    return total / pairs.size();
  };
  const double before = matched_mean();
  AlignTrainConfig config;
  config.epochs = 25;
  config.batch_size = 6;
  config.adam.lr = 3e-3;
  Rng train_rng(608);
  train_contrastive(model, pairs, config, train_rng);
  CHECK(matched_mean() > before + 0.05);
}

TEST_CASE("freeze flags hold the frozen tower still") {
  auto pairs = toy_pairs(6, 609);
  std::vector<std::string> texts;
  for (const auto& [state, text] : pairs) texts.push_back(text);
  TextVocab vocab = TextVocab::build(texts);

  AlignConfig config = tiny_align_config();
  config.freeze_text = true;
  Rng rng(610);
  AlignmentModel model(config, vocab, rng);
  std::map<std::string, Mat> before;
  for (const auto& entry : model.params().all()) before[entry.first] = entry.second;

  AlignTrainConfig tc;
  tc.epochs = 2;
  tc.batch_size = 6;
  tc.adam.lr = 1e-3;
  Rng train_rng(611);
  train_contrastive(model, pairs, tc, train_rng);

  bool text_moved = false, mol_moved = false;
  for (const auto& entry : model.params().all()) {
    const bool same =
        (entry.second - before.at(entry.first)).cwiseAbs().maxCoeff() == 0.0;
    if (entry.first.rfind("text.", 0) == 0)
      text_moved |= !same;
    else if (entry.first.rfind("temp.", 0) != 0)
      mol_moved |= !same;
  }
  CHECK_FALSE(text_moved);
  CHECK(mol_moved);
}

TEST_CASE("alignment gradients match finite differences on positions") {
  Rng rng(612);
  TextVocab vocab = TextVocab::build({"high donor count"});
  AlignmentModel model(tiny_align_config(), vocab, rng);
  DenseState state = centered_state(ref::ammonia());
  const std::vector<RowVec> prompts = {model.embed_text("high donor count")};

  const GuidanceGradients grads = alignment_gradient(model, state, prompts);
  REQUIRE(grads.d_positions.rows() == state.n());

  auto objective = [&](const DenseState& s) {
    const RowVec emb = model.embed_molecule(s);
    double total = 0.0;
    for (const RowVec& y : prompts) total += (y - emb).squaredNorm();
    return total;
  };
  Rng pick(613);
  for (int rep = 0; rep < 10; ++rep) {
    const int r = pick.uniform_int(state.n());
    const int c = pick.uniform_int(3);
    const double h = 1e-5;
    DenseState hi = state, lo = state;
    hi.P(r, c) += h;
    lo.P(r, c) -= h;
    const double fd = (objective(hi) - objective(lo)) / (2.0 * h);
    const double got = grads.d_positions(r, c);
    const double denom = std::max({1.0, std::abs(fd), std::abs(got)});
    CHECK(std::abs(got - fd) / denom < 1e-3);
  }

  // bond-simplex gradients stay symmetric across ordered pairs
  const int n = state.n();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      CHECK((grads.d_bonds.row(edge_index(i, j, n)) -
             grads.d_bonds.row(edge_index(j, i, n)))
                .cwiseAbs()
                .maxCoeff() == 0.0);
}

TEST_CASE("prompt embeddings split compound prompts") {
  Rng rng(614);
  TextVocab vocab = TextVocab::build(
      {"this molecule has high donor count and low gap value"});
  AlignmentModel model(tiny_align_config(), vocab, rng);
  const auto whole =
      model.embed_prompt("This molecule has high donor count.", true);
  CHECK(whole.size() == 1);
  const auto split = model.embed_prompt(
      "This molecule has high donor count, and low gap value.", true);
  CHECK(split.size() == 3);  // full prompt plus two identities
  const auto unsplit = model.embed_prompt(
      "This molecule has high donor count, and low gap value.", false);
  CHECK(unsplit.size() == 1);
}

TEST_CASE("external text embeddings replace the internal tower") {
  AlignConfig config = tiny_align_config();
  config.text_source = "external";
  config.d_text_external = 7;
  Rng rng(615);
  TextVocab vocab = TextVocab::build({"anything"});
  AlignmentModel model(config, vocab, rng);
  RowVec feature = RowVec::LinSpaced(7, 0.5, 3.5);
  model.set_external_embeddings({{"known text", feature}});
  const RowVec emb = model.embed_text("known text");
  CHECK(emb.norm() == doctest::Approx(1.0).epsilon(1e-9));
  CHECK_THROWS(model.embed_text("missing text"));
}

TEST_CASE("embedding tables round trip through json lines") {
  const fs::path dir = fs::temp_directory_path() / "pmol_test_embed";
  fs::create_directories(dir);
  const std::string path = (dir / "table.jsonl").string();
  std::map<std::string, RowVec> table;
  table["alpha beta"] = RowVec::LinSpaced(4, -1.0, 2.0);
  table["gamma"] = RowVec::Constant(4, 0.25);
  write_embedding_lines(path, table);
  const auto back = read_embedding_lines(path);
  REQUIRE(back.size() == 2);
  for (const auto& [text, vec] : table)
    CHECK((back.at(text) - vec).cwiseAbs().maxCoeff() < 1e-12);
  fs::remove_all(dir);
}

TEST_CASE("alignment checkpoints restore the exact model") {
  Rng rng(616);
  auto pairs = toy_pairs(4, 617);
  std::vector<std::string> texts;
  for (const auto& [state, text] : pairs) texts.push_back(text);
  TextVocab vocab = TextVocab::build(texts);
  AlignmentModel model(tiny_align_config(), vocab, rng);

  const fs::path dir = fs::temp_directory_path() / "pmol_test_align_ckpt";
  fs::remove_all(dir);
  save_align_checkpoint(dir.string(), model, {});
  AlignmentModel loaded = load_align_checkpoint(dir.string());
  CHECK(loaded.config().d_align == model.config().d_align);
  CHECK(loaded.vocab().words() == model.vocab().words());
  for (const auto& entry : model.params().all())
    CHECK((loaded.params().at(entry.first) - entry.second)
              .cwiseAbs()
              .maxCoeff() == 0.0);
  const DenseState state = centered_state(ref::water());
  CHECK((loaded.embed_molecule(state) - model.embed_molecule(state))
            .cwiseAbs()
            .maxCoeff() == 0.0);
  fs::remove_all(dir);
}

}  // TEST_SUITE
