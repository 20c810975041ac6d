//
// Project promptmol - Copyright 2026 the promptmol authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "pmol/align.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>

#include <json.hpp>
#include "pmol/archive.hpp"

namespace pmol {
namespace {

using nlohmann::json;

const std::set<std::string>& leading_fillers() {
  static const std::set<std::string> kFillers = {
      "this", "that",  "the", "a",  "an",       "it",      "is",
      "are",  "has",   "have", "its", "molecule", "compound", "with"};
  return kFillers;
}

bool is_connective(const std::string& word) {
  return word == "and" || word == "which";
}

std::string strip_punct(const std::string& word) {
  std::size_t b = 0, e = word.size();
  while (b < e && std::ispunct(static_cast<unsigned char>(word[b]))) ++b;
  while (e > b && std::ispunct(static_cast<unsigned char>(word[e - 1]))) --e;
  return word.substr(b, e - b);
}

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::string join_words(const std::vector<std::string>& words) {
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

double wall_seconds() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double>(clock::now().time_since_epoch())
      .count();
}

ad::Var mean_rows(ad::Tape& tape, ad::Var x) {
  // Routed through the canonical block sum so pooling commutes with atom
  // reordering bit-exactly.
  const int r = x.rows();
  return tape.scale(tape.sum_block_rows(x, r), 1.0 / r);
}

ad::Var unit_row(ad::Tape& tape, ad::Var row) {
  Mat fallback = Mat::Zero(1, row.cols());
  fallback(0, 0) = 1.0;
  return tape.normalize_rows_guarded(row, 1e-12, fallback);
}

void erase_prefixed(nn::GradMap& grads, const std::vector<std::string>& prefixes) {
  for (auto it = grads.begin(); it != grads.end();) {
    bool hit = false;
    for (const auto& p : prefixes)
      if (it->first.rfind(p, 0) == 0) hit = true;
    it = hit ? grads.erase(it) : ++it;
  }
}

Mat symmetrized_pair_rows(const Mat& g, int n) {
  Mat out(g.rows(), g.cols());
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      out.row(edge_index(i, j, n)) =
          0.5 * (g.row(edge_index(i, j, n)) + g.row(edge_index(j, i, n)));
  return out;
}

}  // namespace

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char raw : text) {
    const unsigned char c = static_cast<unsigned char>(raw);
    if (std::isalnum(c)) {
      current += static_cast<char>(std::tolower(c));
    } else if (!current.empty()) {
      tokens.push_back(current);
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(current);
  return tokens;
}

PromptSplit split_identities(const std::string& prompt) {
  if (prompt.empty()) fail_config("cannot split an empty prompt");
  std::vector<std::string> raw_words;
  {
    std::string word;
    for (char c : prompt) {
      if (std::isspace(static_cast<unsigned char>(c))) {
        if (!word.empty()) raw_words.push_back(word);
        word.clear();
      } else {
        word += c;
      }
    }
    if (!word.empty()) raw_words.push_back(word);
  }

  std::vector<std::vector<std::string>> pieces(1);
  std::vector<std::string> connectives;
  for (const auto& raw : raw_words) {
    const std::string word = strip_punct(raw);
    const bool comma_after = raw.find(',') != std::string::npos;
    if (word.empty()) continue;
    if (is_connective(lower(word))) {
      connectives.push_back(lower(word));
      if (!pieces.back().empty()) pieces.emplace_back();
      continue;
    }
    pieces.back().push_back(word);
    if (comma_after && !pieces.back().empty()) pieces.emplace_back();
  }
  while (!pieces.empty() && pieces.back().empty()) pieces.pop_back();

  PromptSplit out;
  if (pieces.size() <= 1) return out;  // single clause: nothing to split
  for (auto& piece : pieces) {
    std::size_t b = 0;
    while (b < piece.size() && leading_fillers().count(lower(piece[b]))) {
      out.connectives.push_back(lower(piece[b]));
      ++b;
    }
    if (b < piece.size())
      out.identities.push_back(
          join_words({piece.begin() + b, piece.end()}));
  }
  out.connectives.insert(out.connectives.end(), connectives.begin(),
                         connectives.end());
  if (out.identities.size() <= 1) {
    // Splitting collapsed to one clause after filler removal.
    return PromptSplit{};
  }
  return out;
}

TextVocab::TextVocab(std::vector<std::string> words)
    : words_(std::move(words)) {
  for (std::size_t i = 0; i < words_.size(); ++i) {
    if (words_[i].empty()) fail_config("text vocabulary has an empty word");
    if (!ids_.emplace(words_[i], static_cast<int>(i) + 1).second)
      fail_config("text vocabulary repeats \"", words_[i], "\"");
  }
}

TextVocab TextVocab::build(const std::vector<std::string>& texts) {
  std::set<std::string> seen;
  for (const auto& text : texts)
    for (const auto& token : tokenize(text)) seen.insert(token);
  return TextVocab(std::vector<std::string>(seen.begin(), seen.end()));
}

int TextVocab::id_of(const std::string& word) const {
  auto it = ids_.find(word);
  return it == ids_.end() ? 0 : it->second;
}

void AlignConfig::check() const {
  CoreWidths widths = mol_widths;
  widths.time_embedding = false;
  widths.check();
  if (d_align < 2) fail_config("alignment width must be >= 2, got ", d_align);
  if (text_source == "internal") {
    if (d_text < 1) fail_config("text width must be >= 1, got ", d_text);
  } else if (text_source == "external") {
    if (d_text_external < 1)
      fail_config("external text width must be >= 1, got ", d_text_external);
  } else {
    fail_config("unknown text source \"", text_source, "\"");
  }
}

AlignmentModel::AlignmentModel(AlignConfig config, TextVocab vocab, Rng& rng)
    : config_(std::move(config)), vocab_(std::move(vocab)) {
  config_.check();
  config_.mol_widths.time_embedding = false;
  init_core_params(params_, config_.mol_widths, rng);
  nn::init_mlp(params_, "mol.head",
               {config_.mol_widths.d_node, config_.d_align, config_.d_align},
               rng);
  const int d_in = config_.text_source == "internal" ? config_.d_text
                                                     : config_.d_text_external;
  if (config_.text_source == "internal") {
    Mat& embed = params_.create("text.embed", vocab_.size(), config_.d_text);
    nn::xavier_init(embed, rng);
  }
  nn::init_mlp(params_, "text.head", {d_in, config_.d_align, config_.d_align},
               rng);
  params_.create("temp.log", 1, 1).setZero();
}

AlignmentModel::AlignmentModel(AlignConfig config, TextVocab vocab,
                               nn::ParamStore params)
    : config_(std::move(config)),
      vocab_(std::move(vocab)),
      params_(std::move(params)) {
  config_.check();
  config_.mol_widths.time_embedding = false;
  for (const char* name : {"mol.head.w0", "text.head.w0", "temp.log"})
    if (!params_.contains(name))
      fail_runtime("alignment checkpoint is missing parameter ", name);
}

void AlignmentModel::set_external_embeddings(
    std::map<std::string, RowVec> table) {
  if (config_.text_source != "external")
    fail_config("model does not use an external text source");
  for (const auto& [text, emb] : table)
    if (emb.size() != config_.d_text_external)
      fail_config("external embedding for \"", text, "\" is ", emb.size(),
                  " wide, expected ", config_.d_text_external);
  external_ = std::move(table);
}

ad::Var AlignmentModel::build_molecule_embedding(nn::TapeBinding& p, ad::Var H,
                                                 ad::Var E, ad::Var P) const {
  CoreOutput core = build_core(p, config_.mol_widths, H, E, P, -1);
  ad::Var pooled = mean_rows(p.tape(), core.nodes);
  return unit_row(p.tape(), nn::apply_mlp(p, "mol.head", pooled));
}

ad::Var AlignmentModel::build_text_embedding(nn::TapeBinding& p,
                                             const std::string& text) const {
  ad::Tape& tape = p.tape();
  ad::Var features;
  if (config_.text_source == "internal") {
    const auto tokens = tokenize(text);
    if (tokens.empty()) fail_config("cannot embed text without tokens");
    std::vector<int> ids;
    ids.reserve(tokens.size());
    for (const auto& tok : tokens) ids.push_back(vocab_.id_of(tok));
    features = mean_rows(tape, tape.gather_rows(p("text.embed"), ids));
  } else {
    auto it = external_.find(text);
    if (it == external_.end())
      fail_config("no external embedding provided for \"", text, "\"");
    features = tape.constant(it->second);
  }
  return unit_row(tape, nn::apply_mlp(p, "text.head", features));
}

RowVec AlignmentModel::embed_molecule(const DenseState& state) const {
  check_state_shapes(state, config_.mol_widths.atom_width,
                     config_.mol_widths.bond_width);
  ad::Tape tape;
  nn::TapeBinding p(tape, params_);
  auto emb = build_molecule_embedding(p, tape.constant(state.H),
                                      tape.constant(state.E),
                                      tape.constant(state.P));
  return tape.value(emb).row(0);
}

RowVec AlignmentModel::embed_text(const std::string& text) const {
  ad::Tape tape;
  nn::TapeBinding p(tape, params_);
  return tape.value(build_text_embedding(p, text)).row(0);
}

double AlignmentModel::alignment_score(const DenseState& state,
                                       const RowVec& text_embedding) const {
  const RowVec f = embed_molecule(state);
  if (f.size() != text_embedding.size())
    fail_config("embedding widths differ: ", f.size(), " vs ",
                text_embedding.size());
  return f.dot(text_embedding);
}

std::vector<RowVec> AlignmentModel::embed_prompt(const std::string& prompt,
                                                 bool identity_split) const {
  std::vector<RowVec> out;
  out.push_back(embed_text(prompt));
  if (!identity_split) return out;
  for (const auto& identity : split_identities(prompt).identities) {
    if (config_.text_source == "external" && !external_.count(identity)) {
      log_warn("no external embedding for identity \"", identity,
               "\", skipping it");
      continue;
    }
    out.push_back(embed_text(identity));
  }
  return out;
}

std::vector<AlignEpochStats> train_contrastive(
    AlignmentModel& model,
    const std::vector<std::pair<DenseState, std::string>>& pairs,
    const AlignTrainConfig& config, Rng& rng,
    const std::function<void(const AlignEpochStats&)>& on_epoch) {
  if (pairs.size() < 2)
    fail_config("contrastive training needs at least 2 pairs, got ",
                pairs.size());
  if (config.epochs < 1) fail_config("epochs must be >= 1");
  if (config.batch_size < 2)
    fail_config("contrastive batch size must be >= 2");

  nn::Adam adam(config.adam);
  std::vector<int> order(pairs.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<AlignEpochStats> history;
  std::vector<std::string> frozen;
  if (model.config().freeze_text) frozen.push_back("text.");
  if (model.config().freeze_molecule) {
    frozen.push_back("mol.");
    frozen.push_back("embed.");
    frozen.push_back("layer");
  }

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double t0 = wall_seconds();
    rng.shuffle(order);
    double loss_sum = 0.0;
    int batches = 0;
    std::size_t cursor = 0;
    while (cursor < order.size()) {
      const std::size_t end =
          std::min(order.size(), cursor + config.batch_size);
      const int B = static_cast<int>(end - cursor);
      if (B < 2) {
        log_warn("skipping a trailing contrastive batch of one pair");
        break;
      }
      ad::Tape tape;
      nn::TapeBinding p(tape, model.params());
      std::vector<ad::Var> mol_cols, text_cols;
      for (std::size_t k = cursor; k < end; ++k) {
        const auto& [state, caption] = pairs[order[k]];
        mol_cols.push_back(tape.transpose(model.build_molecule_embedding(
            p, tape.constant(state.H), tape.constant(state.E),
            tape.constant(state.P))));
        text_cols.push_back(
            tape.transpose(model.build_text_embedding(p, caption)));
      }
      auto mols = tape.transpose(tape.concat_cols(mol_cols));    // B x d
      auto texts = tape.transpose(tape.concat_cols(text_cols));  // B x d
      auto logits = tape.mul_scalar_node(
          tape.matmul(mols, tape.transpose(texts)),
          tape.exp_(p("temp.log")));
      auto both = tape.add(tape.log_softmax_rows(logits),
                           tape.log_softmax_rows(tape.transpose(logits)));
      auto loss = tape.scale(
          tape.sum(tape.mul(both, tape.constant(Mat::Identity(B, B)))),
          -0.5 / B);
      tape.backward(loss);
      nn::GradMap grads;
      p.accumulate_grads(grads);
      if (!frozen.empty()) erase_prefixed(grads, frozen);
      adam.update(model.params(), grads);
      loss_sum += tape.value(loss)(0, 0);
      ++batches;
      cursor = end;
    }
    AlignEpochStats stats;
    stats.epoch = epoch;
    stats.mean_loss = batches > 0 ? loss_sum / batches : 0.0;
    stats.seconds = wall_seconds() - t0;
    history.push_back(stats);
    if (on_epoch) on_epoch(stats);
  }
  return history;
}

GuidanceGradients alignment_gradient(
    const AlignmentModel& model, const DenseState& state,
    const std::vector<RowVec>& prompt_embeddings) {
  if (prompt_embeddings.empty())
    fail_config("alignment gradient needs at least one prompt embedding");
  ad::Tape tape;
  nn::TapeBinding p(tape, model.params());
  auto H = tape.input(state.H, true);
  auto E = tape.input(state.E, true);
  auto P = tape.input(state.P, true);
  auto f = model.build_molecule_embedding(p, H, E, P);
  ad::Var loss;
  for (const auto& y : prompt_embeddings) {
    if (y.size() != f.cols())
      fail_config("prompt embedding width ", y.size(), " does not match ",
                  f.cols());
    auto diff = tape.sub(f, tape.constant(y));
    auto term = tape.sum(tape.mul(diff, diff));
    loss = loss.valid() ? tape.add(loss, term) : term;
  }
  tape.backward(loss);
  GuidanceGradients g;
  g.d_positions = tape.grad(P);
  g.d_atoms = tape.grad(H);
  g.d_bonds = symmetrized_pair_rows(tape.grad(E), state.n());
  if (!g.d_positions.allFinite() || !g.d_atoms.allFinite() ||
      !g.d_bonds.allFinite())
    fail_runtime("alignment gradient is non-finite");
  return g;
}

GuidanceProvider make_alignment_guidance(const AlignmentModel& model,
                                         std::vector<RowVec> prompt_embeddings) {
  const AlignmentModel* m = &model;
  return [m, embeddings = std::move(prompt_embeddings)](
             const DenseState& predicted, int) {
    return alignment_gradient(*m, predicted, embeddings);
  };
}

std::map<std::string, RowVec> read_embedding_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail_config("cannot open embedding file ", path);
  std::map<std::string, RowVec> table;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      fail_config(path, ":", lineno, ": invalid JSON: ", e.what());
    }
    if (!j.is_object() || !j.contains("text") || !j.contains("embedding"))
      fail_config(path, ":", lineno,
                  ": expected {\"text\": ..., \"embedding\": [...]}");
    const std::string text = j.at("text").get<std::string>();
    const auto& arr = j.at("embedding");
    if (!arr.is_array() || arr.empty())
      fail_config(path, ":", lineno, ": embedding must be a non-empty array");
    RowVec v(arr.size());
    for (std::size_t i = 0; i < arr.size(); ++i)
      v(static_cast<long>(i)) = arr[i].get<double>();
    if (!table.emplace(text, std::move(v)).second)
      fail_config(path, ":", lineno, ": duplicate text entry");
  }
  return table;
}

void write_embedding_lines(const std::string& path,
                           const std::map<std::string, RowVec>& table) {
  std::ofstream out(path);
  if (!out) fail_runtime("cannot write embedding file ", path);
  for (const auto& [text, emb] : table) {
    json j;
    j["text"] = text;
    json arr = json::array();
    for (long i = 0; i < emb.size(); ++i) arr.push_back(emb(i));
    j["embedding"] = std::move(arr);
    out << j.dump() << "\n";
  }
}

void save_align_checkpoint(const std::string& dir, const AlignmentModel& model,
                           const std::vector<AlignEpochStats>& history) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail_runtime("cannot create checkpoint directory ", dir);
  const AlignConfig& c = model.config();
  json config;
  config["mol_widths"] = {{"layers", c.mol_widths.layers},
                          {"d_node", c.mol_widths.d_node},
                          {"d_edge", c.mol_widths.d_edge},
                          {"d_pos", c.mol_widths.d_pos},
                          {"atom_width", c.mol_widths.atom_width},
                          {"bond_width", c.mol_widths.bond_width}};
  config["d_align"] = c.d_align;
  config["d_text"] = c.d_text;
  config["text_source"] = c.text_source;
  config["d_text_external"] = c.d_text_external;
  config["freeze_text"] = c.freeze_text;
  config["freeze_molecule"] = c.freeze_molecule;
  config["vocab"] = model.vocab().words();
  {
    std::ofstream out(dir + "/config.json");
    if (!out) fail_runtime("cannot write ", dir, "/config.json");
    out << config.dump(2) << "\n";
  }
  write_archive(dir + "/params.bin", model.params().all());
  {
    std::ofstream out(dir + "/metrics.csv");
    if (!out) fail_runtime("cannot write ", dir, "/metrics.csv");
    out << "epoch,loss,seconds\n";
    for (const auto& s : history)
      out << s.epoch << "," << s.mean_loss << "," << s.seconds << "\n";
  }
}

AlignmentModel load_align_checkpoint(const std::string& dir) {
  std::ifstream in(dir + "/config.json");
  if (!in) fail_runtime("cannot open checkpoint config ", dir, "/config.json");
  json config = json::parse(in, nullptr, true);
  AlignConfig c;
  const json& w = config.at("mol_widths");
  c.mol_widths.layers = w.at("layers").get<int>();
  c.mol_widths.d_node = w.at("d_node").get<int>();
  c.mol_widths.d_edge = w.at("d_edge").get<int>();
  c.mol_widths.d_pos = w.at("d_pos").get<int>();
  c.mol_widths.atom_width = w.at("atom_width").get<int>();
  c.mol_widths.bond_width = w.at("bond_width").get<int>();
  c.mol_widths.time_embedding = false;
  c.d_align = config.at("d_align").get<int>();
  c.d_text = config.at("d_text").get<int>();
  c.text_source = config.at("text_source").get<std::string>();
  c.d_text_external = config.at("d_text_external").get<int>();
  c.freeze_text = config.at("freeze_text").get<bool>();
  c.freeze_molecule = config.at("freeze_molecule").get<bool>();
  TextVocab vocab(config.at("vocab").get<std::vector<std::string>>());
  nn::ParamStore params;
  for (auto& [name, value] : read_archive(dir + "/params.bin"))
    params.create(name, static_cast<int>(value.rows()),
                  static_cast<int>(value.cols())) = value;
  return AlignmentModel(std::move(c), std::move(vocab), std::move(params));
}

}  // namespace pmol
