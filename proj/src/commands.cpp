//
// Project promptmol - Copyright 2026 the promptmol authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "pmol/commands.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <optional>
#include <thread>

#include "pmol/align.hpp"
#include "pmol/fingerprint.hpp"
#include "pmol/guidance.hpp"
#include "pmol/metrics.hpp"
#include "pmol/molecule_json.hpp"
#include "pmol/trainer.hpp"

namespace pmol {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

void check_keys(const json& j, const std::string& where,
                std::initializer_list<const char*> allowed) {
  if (!j.is_object()) fail_config(where, " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) fail_config(where, " has unknown key \"", key, "\"");
  }
}

template <typename T>
T get_or(const json& j, const std::string& key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    fail_config("config key \"", key, "\" has the wrong type");
  }
}

template <typename T>
T get_required(const json& j, const std::string& key) {
  if (!j.contains(key)) fail_config("config is missing required key \"", key, "\"");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    fail_config("config key \"", key, "\" has the wrong type");
  }
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail_runtime("cannot create output directory ", dir);
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) fail_runtime("cannot write ", path);
  out << text;
}

void echo_resolved_config(const std::string& out_dir, const json& resolved) {
  write_text_file(out_dir + "/resolved_config.json", resolved.dump(2) + "\n");
}

CoreWidths model_widths_from(const json& m, int atom_width, int bond_width) {
  CoreWidths w;
  w.layers = get_or(m, "layers", 5);
  w.d_node = get_or(m, "d_node", 256);
  w.d_edge = get_or(m, "d_edge", 128);
  w.d_pos = get_or(m, "d_pos", 64);
  w.atom_width = atom_width;
  w.bond_width = bond_width;
  return w;
}

json widths_json(const CoreWidths& w) {
  return json{{"layers", w.layers},
              {"d_node", w.d_node},
              {"d_edge", w.d_edge},
              {"d_pos", w.d_pos}};
}

std::vector<std::string> sorted_molecule_files(const std::string& dir,
                                               const char* what) {
  if (!fs::is_directory(dir))
    fail_config(what, " path is not a directory: ", dir);
  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".json" &&
        entry.path().filename() != "resolved_config.json" &&
        entry.path().filename() != "metrics.json" &&
        entry.path().filename() != "summary.json")
      files.push_back(entry.path().string());
  std::sort(files.begin(), files.end());
  return files;
}

std::vector<DenseState> centered_states(const Corpus& corpus) {
  std::vector<DenseState> states;
  states.reserve(corpus.items.size());
  for (const auto& item : corpus.items) {
    DenseState s = to_dense_state(item.mol);
    center_state_positions(s);
    states.push_back(std::move(s));
  }
  return states;
}

}  // namespace

std::string resolve_checkpoint_path(const std::string& path) {
  if (path.empty()) fail_config("empty checkpoint path");
  if (fs::exists(path) || fs::path(path).is_absolute()) return path;
  if (const char* root = std::getenv("PROMPTMOL_CHECKPOINT_ROOT")) {
    const std::string joined = std::string(root) + "/" + path;
    if (fs::exists(joined)) return joined;
  }
  return path;
}

std::string cmd_train_diffusion(const json& config) {
  check_keys(config, "train-diffusion config",
             {"corpus", "out", "seed", "split", "model", "schedule", "train"});
  const std::string corpus_dir = get_required<std::string>(config, "corpus");
  const std::string out_dir = get_required<std::string>(config, "out");
  const std::uint64_t seed = get_or<std::uint64_t>(config, "seed", 1);

  const json split_cfg = config.value("split", json::object());
  check_keys(split_cfg, "split", {"train_fraction", "seed"});
  const double train_fraction = get_or(split_cfg, "train_fraction", 0.9);
  const std::uint64_t split_seed = get_or<std::uint64_t>(split_cfg, "seed", 13);

  const json model_cfg = config.value("model", json::object());
  check_keys(model_cfg, "model", {"layers", "d_node", "d_edge", "d_pos", "T"});
  const json sched_cfg = config.value("schedule", json::object());
  check_keys(sched_cfg, "schedule", {"kind"});
  const json train_cfg = config.value("train", json::object());
  check_keys(train_cfg, "train",
             {"epochs", "batch_size", "lr", "position_weight", "atom_weight",
              "bond_weight"});

  VocabPtr vocab = AtomVocabulary::default_vocabulary();
  Corpus corpus = load_corpus(corpus_dir, vocab);
  SplitResult split = split_corpus(corpus, train_fraction, split_seed);
  if (split.train.items.empty()) fail_config("training split is empty");

  DenoiserConfig dc;
  dc.widths = model_widths_from(model_cfg, vocab->size(), kBondCategoryCount);
  dc.T = get_or(model_cfg, "T", 800);
  ScheduleConfig sc;
  sc.T = dc.T;
  sc.kind = get_or<std::string>(sched_cfg, "kind", "cosine");
  NoiseSchedule schedule(sc, split.train.atom_marginal,
                         split.train.bond_marginal);

  TrainConfig tc;
  tc.epochs = get_or(train_cfg, "epochs", 32);
  tc.batch_size = get_or(train_cfg, "batch_size", 32);
  tc.adam.lr = get_or(train_cfg, "lr", 1e-5);
  tc.weights.position = get_or(train_cfg, "position_weight", 1.0);
  tc.weights.atoms = get_or(train_cfg, "atom_weight", 1.0);
  tc.weights.bonds = get_or(train_cfg, "bond_weight", 1.0);

  ensure_dir(out_dir);
  json resolved = {
      {"command", "train-diffusion"},
      {"corpus", corpus_dir},
      {"out", out_dir},
      {"seed", seed},
      {"split", {{"train_fraction", train_fraction}, {"seed", split_seed}}},
      {"model", widths_json(dc.widths)},
      {"schedule", {{"kind", sc.kind}}},
      {"train",
       {{"epochs", tc.epochs},
        {"batch_size", tc.batch_size},
        {"lr", tc.adam.lr},
        {"position_weight", tc.weights.position},
        {"atom_weight", tc.weights.atoms},
        {"bond_weight", tc.weights.bonds}}}};
  resolved["model"]["T"] = dc.T;
  echo_resolved_config(out_dir, resolved);

  Rng root(seed);
  Rng init_rng = root.spawn(0);
  Rng train_rng = root.spawn(1);
  DenoiserModel model(dc, init_rng);
  std::vector<DenseState> states = centered_states(split.train);
  auto history = train_diffusion(model, schedule, states, tc, train_rng,
                                 [](const EpochStats& s) {
                                   log_info("epoch ", s.epoch, " loss ",
                                            s.mean_loss.total);
                                 });
  const std::string ckpt = out_dir + "/checkpoint";
  save_denoiser_checkpoint(ckpt, model, schedule, history);
  return ckpt;
}

std::string cmd_train_align(const json& config) {
  check_keys(config, "train-align config",
             {"corpus", "out", "seed", "split", "caption", "model", "train",
              "text_source", "external_embeddings"});
  const std::string corpus_dir = get_required<std::string>(config, "corpus");
  const std::string out_dir = get_required<std::string>(config, "out");
  const std::uint64_t seed = get_or<std::uint64_t>(config, "seed", 1);

  const json split_cfg = config.value("split", json::object());
  check_keys(split_cfg, "split", {"train_fraction", "seed"});
  const double train_fraction = get_or(split_cfg, "train_fraction", 0.9);
  const std::uint64_t split_seed = get_or<std::uint64_t>(split_cfg, "seed", 13);

  const json caption_cfg = config.value("caption", json::object());
  check_keys(caption_cfg, "caption",
             {"properties", "display", "thresholds", "high_template",
              "low_template"});
  const json model_cfg = config.value("model", json::object());
  check_keys(model_cfg, "model",
             {"layers", "d_node", "d_edge", "d_pos", "d_align", "d_text"});
  const json train_cfg = config.value("train", json::object());
  check_keys(train_cfg, "train",
             {"epochs", "batch_size", "lr", "freeze_text", "freeze_molecule"});

  VocabPtr vocab = AtomVocabulary::default_vocabulary();
  Corpus corpus = load_corpus(corpus_dir, vocab);

  CaptionConfig cap;
  cap.properties =
      get_or(caption_cfg, "properties", std::vector<std::string>{});
  if (caption_cfg.contains("display"))
    cap.display = caption_cfg.at("display")
                      .get<std::map<std::string, std::string>>();
  if (caption_cfg.contains("thresholds"))
    cap.thresholds =
        caption_cfg.at("thresholds").get<std::map<std::string, double>>();
  cap.high_template =
      get_or<std::string>(caption_cfg, "high_template", cap.high_template);
  cap.low_template =
      get_or<std::string>(caption_cfg, "low_template", cap.low_template);
  attach_captions(corpus, cap);

  SplitResult split = split_corpus(corpus, train_fraction, split_seed);
  std::vector<std::pair<DenseState, std::string>> pairs;
  std::vector<std::string> caption_texts;
  for (const auto& item : split.train.items) {
    DenseState state = to_dense_state(item.mol);
    center_state_positions(state);
    for (const auto& caption : item.captions) {
      pairs.emplace_back(state, caption);
      caption_texts.push_back(caption);
    }
  }
  if (pairs.size() < 2)
    fail_config("caption generation produced ", pairs.size(),
                " training pairs; need at least 2");

  AlignConfig ac;
  ac.mol_widths =
      model_widths_from(model_cfg, vocab->size(), kBondCategoryCount);
  ac.mol_widths.layers = get_or(model_cfg, "layers", 3);
  ac.mol_widths.time_embedding = false;
  ac.d_align = get_or(model_cfg, "d_align", 128);
  ac.d_text = get_or(model_cfg, "d_text", 64);
  ac.text_source = get_or<std::string>(config, "text_source", "internal");
  const json train_defaults = train_cfg;
  AlignTrainConfig tc;
  tc.epochs = get_or(train_cfg, "epochs", 8);
  tc.batch_size = get_or(train_cfg, "batch_size", 8);
  tc.adam.lr = get_or(train_cfg, "lr", 1e-5);
  ac.freeze_text = get_or(train_cfg, "freeze_text", false);
  ac.freeze_molecule = get_or(train_cfg, "freeze_molecule", false);

  std::map<std::string, RowVec> external;
  if (ac.text_source == "external") {
    const std::string path =
        get_required<std::string>(config, "external_embeddings");
    external = read_embedding_lines(path);
    if (external.empty()) fail_config("external embedding file is empty");
    ac.d_text_external = static_cast<int>(external.begin()->second.size());
  }

  ensure_dir(out_dir);
  json resolved = {
      {"command", "train-align"},
      {"corpus", corpus_dir},
      {"out", out_dir},
      {"seed", seed},
      {"split", {{"train_fraction", train_fraction}, {"seed", split_seed}}},
      {"model",
       {{"layers", ac.mol_widths.layers},
        {"d_node", ac.mol_widths.d_node},
        {"d_edge", ac.mol_widths.d_edge},
        {"d_pos", ac.mol_widths.d_pos},
        {"d_align", ac.d_align},
        {"d_text", ac.d_text}}},
      {"text_source", ac.text_source},
      {"train",
       {{"epochs", tc.epochs},
        {"batch_size", tc.batch_size},
        {"lr", tc.adam.lr},
        {"freeze_text", ac.freeze_text},
        {"freeze_molecule", ac.freeze_molecule}}}};
  echo_resolved_config(out_dir, resolved);

  Rng root(seed);
  Rng init_rng = root.spawn(0);
  Rng train_rng = root.spawn(1);
  AlignmentModel model(ac, TextVocab::build(caption_texts), init_rng);
  if (!external.empty()) model.set_external_embeddings(std::move(external));
  auto history = train_contrastive(model, pairs, tc, train_rng,
                                   [](const AlignEpochStats& s) {
                                     log_info("align epoch ", s.epoch,
                                              " loss ", s.mean_loss);
                                   });
  const std::string ckpt = out_dir + "/checkpoint-align";
  save_align_checkpoint(ckpt, model, history);
  return ckpt;
}

std::string cmd_sample(const json& config) {
  check_keys(config, "sample config",
             {"checkpoint", "out", "seed", "n_samples", "n_atoms", "corpus"});
  const std::string ckpt =
      resolve_checkpoint_path(get_required<std::string>(config, "checkpoint"));
  const std::string out_dir = get_required<std::string>(config, "out");
  const std::uint64_t seed = get_or<std::uint64_t>(config, "seed", 1);
  const int n_samples = get_required<int>(config, "n_samples");
  const int n_atoms = get_required<int>(config, "n_atoms");
  if (n_samples < 0) fail_config("n_samples must be >= 0");
  if (n_atoms < 1) fail_config("n_atoms must be >= 1");

  LoadedDenoiser loaded = load_denoiser_checkpoint(ckpt);
  VocabPtr vocab = AtomVocabulary::default_vocabulary();
  if (vocab->size() != loaded.model.config().widths.atom_width)
    fail_config("checkpoint atom width ",
                loaded.model.config().widths.atom_width,
                " does not match the vocabulary (", vocab->size(), ")");

  ensure_dir(out_dir + "/samples");
  echo_resolved_config(out_dir, json{{"command", "sample"},
                                     {"checkpoint", ckpt},
                                     {"out", out_dir},
                                     {"seed", seed},
                                     {"n_samples", n_samples},
                                     {"n_atoms", n_atoms}});

  Rng root(seed);
  std::vector<Molecule> samples;
  std::ofstream manifest(out_dir + "/manifest.csv");
  if (!manifest) fail_runtime("cannot write ", out_dir, "/manifest.csv");
  manifest << "file,n_atoms,valid,mol_stable\n";
  for (int k = 0; k < n_samples; ++k) {
    Rng run_rng = root.spawn(static_cast<std::uint64_t>(k));
    Molecule mol = sample_molecule(loaded.model, loaded.schedule, n_atoms,
                                   vocab, run_rng);
    char name[32];
    std::snprintf(name, sizeof(name), "sample_%05d.json", k);
    write_molecule_file(mol, out_dir + "/samples/" + name);
    const auto report = validate(mol);
    manifest << name << "," << mol.atom_count() << "," << report.is_valid
             << "," << report.mol_stable << "\n";
    samples.push_back(std::move(mol));
  }

  if (config.contains("corpus") && !samples.empty()) {
    Corpus corpus =
        load_corpus(get_required<std::string>(config, "corpus"), vocab);
    const GenerationMetrics gm = generation_metrics(samples, corpus);
    json metrics = {{"mol_stable_fraction", gm.mol_stable_fraction},
                    {"atom_stable_fraction", gm.atom_stable_fraction},
                    {"validity", gm.validity},
                    {"uniqueness", gm.uniqueness},
                    {"atom_tv", gm.atom_tv},
                    {"bond_tv", gm.bond_tv}};
    for (const auto& [cat, w1] : gm.bond_length_w1)
      metrics["bond_length_w1"][bond_name(cat)] = w1;
    write_text_file(out_dir + "/metrics.json", metrics.dump(2) + "\n");
  }
  return out_dir;
}

std::string cmd_optimize(const json& config) {
  check_keys(config, "optimize config",
             {"diffusion_checkpoint", "align_checkpoint", "molecule", "prompt",
              "variant", "mask", "anchors", "k_hop", "n_new", "n_extra",
              "anchor_radius", "drop_disconnected_extras", "lambda", "sigma_y",
              "manifold_constraint", "identity_split", "partial_T",
              "similarity_target", "n_runs", "seed", "out", "workers"});
  const std::string diff_ckpt = resolve_checkpoint_path(
      get_required<std::string>(config, "diffusion_checkpoint"));
  const std::string mol_path = get_required<std::string>(config, "molecule");
  const std::string out_dir = get_required<std::string>(config, "out");
  const std::string variant = get_or<std::string>(config, "variant", "flexible");
  const std::uint64_t seed = get_or<std::uint64_t>(config, "seed", 1);
  const int n_runs = get_or(config, "n_runs", 1);
  const int workers = std::max(1, get_or(config, "workers", 1));
  if (n_runs < 1) fail_config("n_runs must be >= 1");

  GuidanceConfig gc;
  gc.lambda = get_or(config, "lambda", 0.0);
  gc.sigma_y = get_or(config, "sigma_y", 1.0);
  gc.manifold_constraint = get_or(config, "manifold_constraint", false);
  gc.identity_split = get_or(config, "identity_split", true);
  (void)gc.lambda_eff();  // validate early

  OptimizationTask task;
  task.variant = variant;
  task.protected_atoms = get_or(config, "mask", std::vector<int>{});
  if (config.contains("anchors"))
    for (const auto& a : config.at("anchors")) {
      if (!a.is_array() || a.size() != 3)
        fail_config("each anchor must be [x, y, z]");
      task.anchors.emplace_back(a[0].get<double>(), a[1].get<double>(),
                                a[2].get<double>());
    }
  task.k_hop = get_or(config, "k_hop", 1);
  task.n_new = get_or(config, "n_new", 1);
  task.n_extra = get_or(config, "n_extra", 0);
  task.anchor_radius = get_or(config, "anchor_radius", 3.0);
  task.drop_disconnected_extras =
      get_or(config, "drop_disconnected_extras", true);

  VocabPtr vocab = AtomVocabulary::default_vocabulary();
  Molecule M0 = read_molecule_file(mol_path, vocab);
  LoadedDenoiser loaded = load_denoiser_checkpoint(diff_ckpt);

  std::optional<AlignmentModel> align;
  std::vector<RowVec> prompt_embeddings;
  const std::string prompt = get_or<std::string>(config, "prompt", "");
  if (config.contains("align_checkpoint")) {
    align = load_align_checkpoint(resolve_checkpoint_path(
        get_required<std::string>(config, "align_checkpoint")));
    if (!prompt.empty())
      prompt_embeddings = align->embed_prompt(prompt, gc.identity_split);
  }
  if (gc.lambda != 0.0 && prompt_embeddings.empty())
    fail_config("guided optimization (lambda > 0) needs an align_checkpoint ",
                "and a prompt");

  // Noising depth, shared by every run.
  Rng root(seed);
  int partial_T = 0;
  std::string preset = "500";
  if (config.contains("similarity_target")) {
    const auto& band = config.at("similarity_target");
    if (!band.is_array() || band.size() != 2)
      fail_config("similarity_target must be [lo, hi]");
    gc.similarity_lo = band[0].get<double>();
    gc.similarity_hi = band[1].get<double>();
    Rng probe_rng = root.spawn(0xA11CEull);
    partial_T =
        choose_partial_T(M0, loaded.model, loaded.schedule, gc, probe_rng);
  } else if (config.contains("partial_T")) {
    const json& pt = config.at("partial_T");
    if (pt.is_string()) {
      preset = pt.get<std::string>();
      partial_T = choose_partial_T(M0, loaded.model, loaded.schedule, gc, root,
                                   preset);
    } else {
      partial_T = pt.get<int>();
      if (partial_T < 0 || partial_T > loaded.schedule.T())
        fail_config("partial_T ", partial_T, " outside [0, ",
                    loaded.schedule.T(), "]");
    }
  } else {
    partial_T = choose_partial_T(M0, loaded.model, loaded.schedule, gc, root,
                                 preset);
  }
  gc.partial_T = partial_T;

  ensure_dir(out_dir);
  json resolved = config;
  resolved["command"] = "optimize";
  resolved["variant"] = variant;
  resolved["lambda"] = gc.lambda;
  resolved["sigma_y"] = gc.sigma_y;
  resolved["n_runs"] = n_runs;
  resolved["seed"] = seed;
  resolved["partial_T"] = partial_T;
  resolved["workers"] = workers;
  echo_resolved_config(out_dir, resolved);

  const DenseState state0 = to_dense_state(M0);
  const double align_before =
      prompt_embeddings.empty()
          ? std::numeric_limits<double>::quiet_NaN()
          : align->alignment_score(state0, prompt_embeddings[0]);
  const Fingerprint fp0 = ecfp(M0);

  struct RunRow {
    std::string file;
    std::uint64_t stream = 0;
    double align_after = 0.0;
    double tanimoto_to_input = 0.0;
    bool valid = false;
    int partial_T = 0;
    int dropped = 0;
  };
  std::vector<RunRow> rows(n_runs);
  std::atomic<int> next{0};
  std::mutex error_mutex;
  std::exception_ptr error;

  auto worker = [&]() {
    while (true) {
      const int r = next.fetch_add(1);
      if (r >= n_runs) return;
      try {
        Rng run_rng = root.spawn(static_cast<std::uint64_t>(r) + 1);
        GuidanceProvider provider;
        if (gc.lambda != 0.0)
          provider = make_alignment_guidance(*align, prompt_embeddings);
        OptimizationResult result = [&] {
          if (variant == "flexible")
            return optimize_flexible(M0, loaded.model, loaded.schedule, gc,
                                     task, run_rng, provider);
          if (variant == "constrained")
            return optimize_constrained(M0, loaded.model, loaded.schedule, gc,
                                        task, run_rng, provider);
          if (variant == "site")
            return optimize_site(M0, loaded.model, loaded.schedule, gc, task,
                                 run_rng, provider);
          fail_config("unknown variant \"", variant, "\"");
        }();
        char name[32];
        std::snprintf(name, sizeof(name), "run_%03d.json", r);
        write_molecule_file(result.molecule, out_dir + "/" + std::string(name));
        RunRow row;
        row.file = name;
        row.stream = static_cast<std::uint64_t>(r) + 1;
        row.align_after =
            prompt_embeddings.empty()
                ? std::numeric_limits<double>::quiet_NaN()
                : align->alignment_score(to_dense_state(result.molecule),
                                         prompt_embeddings[0]);
        row.tanimoto_to_input = tanimoto(fp0, ecfp(result.molecule));
        row.valid = validate(result.molecule).is_valid;
        row.partial_T = result.used_partial_T;
        row.dropped = result.atoms_dropped;
        rows[r] = std::move(row);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  const int n_threads = std::min(workers, n_runs);
  pool.reserve(n_threads);
  for (int w = 0; w < n_threads; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);

  std::ofstream manifest(out_dir + "/manifest.csv");
  if (!manifest) fail_runtime("cannot write ", out_dir, "/manifest.csv");
  manifest << "run,file,seed_stream,align_before,align_after,"
              "tanimoto_to_input,valid,partial_T,atoms_dropped\n";
  for (int r = 0; r < n_runs; ++r)
    manifest << r << "," << rows[r].file << "," << rows[r].stream << ","
             << align_before << "," << rows[r].align_after << ","
             << rows[r].tanimoto_to_input << "," << rows[r].valid << ","
             << rows[r].partial_T << "," << rows[r].dropped << "\n";
  return out_dir;
}

std::string cmd_evaluate(const json& config) {
  check_keys(config, "evaluate config",
             {"inputs", "outputs", "specs", "corpus", "out"});
  const std::string inputs_dir = get_required<std::string>(config, "inputs");
  const std::string out_dir = get_required<std::string>(config, "out");
  if (!config.contains("specs") || !config.at("specs").is_array() ||
      config.at("specs").empty())
    fail_config("evaluate needs a non-empty \"specs\" array");

  std::vector<std::string> output_dirs;
  const json& outputs = config.at("outputs");
  if (outputs.is_string()) {
    output_dirs.push_back(outputs.get<std::string>());
  } else if (outputs.is_array()) {
    for (const auto& o : outputs) output_dirs.push_back(o.get<std::string>());
  } else {
    fail_config("\"outputs\" must be a directory or a list of directories");
  }
  if (output_dirs.empty()) fail_config("no output directories given");

  std::vector<PropertySpec> specs;
  for (const auto& js : config.at("specs")) {
    check_keys(js, "spec", {"name", "evaluator", "direction", "threshold",
                            "label"});
    PropertySpec s;
    s.evaluator = get_required<std::string>(js, "evaluator");
    s.name = get_or<std::string>(js, "name", s.evaluator);
    s.direction = get_or<std::string>(js, "direction", "increase");
    s.threshold = get_or(js, "threshold", 0.0);
    s.label = get_or<std::string>(js, "label", "");
    specs.push_back(std::move(s));
  }

  VocabPtr vocab = AtomVocabulary::default_vocabulary();
  std::map<std::string, PropertyRegressor> regressors;
  for (const auto& s : specs)
    if (s.evaluator == "regressor" && !regressors.count(s.label)) {
      if (!config.contains("corpus"))
        fail_config("regressor spec \"", s.name,
                    "\" needs \"corpus\" for labels");
      Corpus corpus =
          load_corpus(get_required<std::string>(config, "corpus"), vocab);
      regressors.emplace(s.label,
                         PropertyRegressor::fit(corpus.items, s.label));
    }

  const auto input_files = sorted_molecule_files(inputs_dir, "inputs");
  if (input_files.empty()) fail_config("no molecules under ", inputs_dir);
  std::vector<Molecule> inputs;
  for (const auto& f : input_files)
    inputs.push_back(read_molecule_file(f, vocab));

  std::vector<HitReport> reports;
  for (const auto& dir : output_dirs) {
    const auto files = sorted_molecule_files(dir, "outputs");
    if (files.empty()) fail_config("no molecules under ", dir);
    if (files.size() != input_files.size())
      fail_config("outputs ", dir, " has ", files.size(),
                  " molecules, inputs have ", input_files.size());
    std::vector<Molecule> outs;
    for (const auto& f : files) outs.push_back(read_molecule_file(f, vocab));
    reports.push_back(evaluate_hits(inputs, outs, specs, regressors));
  }
  const HitReport pooled = reports.size() == 1 ? reports[0]
                                               : aggregate_any_hit(reports);

  ensure_dir(out_dir);
  echo_resolved_config(out_dir, config);
  {
    std::ofstream csv(out_dir + "/report.csv");
    if (!csv) fail_runtime("cannot write ", out_dir, "/report.csv");
    csv << "pair";
    for (std::size_t run = 0; run < reports.size(); ++run)
      csv << ",hit_run" << run;
    csv << ",hit_any\n";
    for (std::size_t k = 0; k < inputs.size(); ++k) {
      csv << fs::path(input_files[k]).stem().string();
      for (const auto& rep : reports) csv << "," << rep.hits[k];
      csv << "," << pooled.hits[k] << "\n";
    }
  }
  json summary;
  summary["n_pairs"] = inputs.size();
  summary["n_runs"] = reports.size();
  summary["hit_ratio"] = pooled.hit_ratio;
  summary["validity_ratio"] = pooled.validity_ratio;
  json per_run = json::array();
  for (const auto& rep : reports) per_run.push_back(rep.hit_ratio);
  summary["per_run_hit_ratio"] = std::move(per_run);
  for (const auto& [name, frac] : reports[0].per_property)
    summary["per_property"][name] = frac;
  write_text_file(out_dir + "/summary.json", summary.dump(2) + "\n");
  return out_dir;
}

std::string run_command(const std::string& command,
                        const std::string& config_json) {
  json config;
  try {
    config = json::parse(config_json);
  } catch (const json::exception& e) {
    fail_config("config is not valid JSON: ", e.what());
  }
  if (command == "train-diffusion") return cmd_train_diffusion(config);
  if (command == "train-align") return cmd_train_align(config);
  if (command == "sample") return cmd_sample(config);
  if (command == "optimize") return cmd_optimize(config);
  if (command == "evaluate") return cmd_evaluate(config);
  fail_config("unknown command \"", command, "\"");
}

}  // namespace pmol
