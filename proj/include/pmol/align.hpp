//
// Project promptmol - Copyright 2026 the promptmol authors.
// SPDX-License-Identifier: Apache-2.0
//

#ifndef PMOL_ALIGN_HPP
#define PMOL_ALIGN_HPP

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "pmol/guidance.hpp"

namespace pmol {

// Lowercased alphanumeric runs; everything else separates tokens.
std::vector<std::string> tokenize(const std::string& text);

// Clause split on commas and the connectives "and"/"which", with leading
// filler words ("This molecule is ...") moved aside.  Single-clause prompts
// yield no identities (the full prompt embedding stands alone).  For split
// prompts, identities plus connectives carry the prompt's word multiset.
struct PromptSplit {
  std::vector<std::string> identities;
  std::vector<std::string> connectives;  // removed filler and joiner words
};
PromptSplit split_identities(const std::string& prompt);

// Word-level lookup; id 0 is the unknown slot, known words start at 1.
class TextVocab {
 public:
  explicit TextVocab(std::vector<std::string> words);
  static TextVocab build(const std::vector<std::string>& texts);

  int id_of(const std::string& word) const;
  int size() const { return static_cast<int>(words_.size()) + 1; }
  const std::vector<std::string>& words() const { return words_; }

 private:
  std::vector<std::string> words_;
  std::map<std::string, int> ids_;
};

struct AlignConfig {
  CoreWidths mol_widths;  // trunk shared with the denoiser family; no
                          // step conditioning (clean inputs)
  int d_align = 128;
  int d_text = 64;
  std::string text_source = "internal";  // "internal" | "external"
  int d_text_external = 0;  // width of externally provided embeddings
  bool freeze_text = false;
  bool freeze_molecule = false;
  void check() const;
};

// Paired encoders onto a shared unit sphere; the score is the dot product
// of the two unit embeddings, bounded in [-1, 1].
class AlignmentModel {
 public:
  AlignmentModel(AlignConfig config, TextVocab vocab, Rng& rng);
  AlignmentModel(AlignConfig config, TextVocab vocab, nn::ParamStore params);

  const AlignConfig& config() const { return config_; }
  const TextVocab& vocab() const { return vocab_; }
  const nn::ParamStore& params() const { return params_; }
  nn::ParamStore& params() { return params_; }

  // Externally computed text features keyed by exact text (consumed when
  // text_source is "external"); widths must match d_text_external.
  void set_external_embeddings(std::map<std::string, RowVec> table);

  ad::Var build_molecule_embedding(nn::TapeBinding& p, ad::Var H, ad::Var E,
                                   ad::Var P) const;
  ad::Var build_text_embedding(nn::TapeBinding& p,
                               const std::string& text) const;

  RowVec embed_molecule(const DenseState& state) const;
  RowVec embed_text(const std::string& text) const;
  double alignment_score(const DenseState& state,
                         const RowVec& text_embedding) const;

  // Full-prompt embedding first, then identity embeddings when splitting
  // finds multiple clauses.
  std::vector<RowVec> embed_prompt(const std::string& prompt,
                                   bool identity_split) const;

 private:
  AlignConfig config_;
  TextVocab vocab_;
  nn::ParamStore params_;
  std::map<std::string, RowVec> external_;
};

struct AlignTrainConfig {
  int epochs = 4;
  int batch_size = 8;  // in-batch negatives; batches of one are skipped
  nn::AdamConfig adam;
};

struct AlignEpochStats {
  int epoch = 0;
  double mean_loss = 0.0;
  double seconds = 0.0;
};

// Symmetric InfoNCE over in-batch negatives with a learned inverse
// temperature (initialized at 1, so the initial loss sits near ln B).
std::vector<AlignEpochStats> train_contrastive(
    AlignmentModel& model,
    const std::vector<std::pair<DenseState, std::string>>& pairs,
    const AlignTrainConfig& config, Rng& rng,
    const std::function<void(const AlignEpochStats&)>& on_epoch = {});

// Gradients of sum_k ||y_k - f(state)||^2 with respect to positions and the
// simplex coordinates of atoms and bonds; bond gradients symmetrized.
GuidanceGradients alignment_gradient(
    const AlignmentModel& model, const DenseState& state,
    const std::vector<RowVec>& prompt_embeddings);

// Provider wiring for guided sampling; the model must outlive the provider.
GuidanceProvider make_alignment_guidance(
    const AlignmentModel& model, std::vector<RowVec> prompt_embeddings);

// JSON-lines exchange format, one object per line:
//   {"text": "...", "embedding": [..]}
std::map<std::string, RowVec> read_embedding_lines(const std::string& path);
void write_embedding_lines(const std::string& path,
                           const std::map<std::string, RowVec>& table);

void save_align_checkpoint(const std::string& dir, const AlignmentModel& model,
                           const std::vector<AlignEpochStats>& history);
AlignmentModel load_align_checkpoint(const std::string& dir);

}  // namespace pmol

#endif  // PMOL_ALIGN_HPP
