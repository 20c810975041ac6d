//
// Project promptmol - Copyright 2026 the promptmol authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "pmol/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <utility>

#include <json.hpp>
#include "pmol/archive.hpp"
#include "pmol/molecule.hpp"

namespace pmol {
namespace {

using nlohmann::json;

Vec off_diagonal_mask(int n) {
  Vec mask = Vec::Ones(static_cast<long>(n) * n);
  for (int i = 0; i < n; ++i) mask(edge_index(i, i, n)) = 0.0;
  return mask;
}

double wall_seconds() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double>(clock::now().time_since_epoch())
      .count();
}

json widths_to_json(const CoreWidths& w) {
  return json{{"layers", w.layers},           {"d_node", w.d_node},
              {"d_edge", w.d_edge},           {"d_pos", w.d_pos},
              {"atom_width", w.atom_width},   {"bond_width", w.bond_width},
              {"time_embedding", w.time_embedding}};
}

CoreWidths widths_from_json(const json& j) {
  CoreWidths w;
  w.layers = j.at("layers").get<int>();
  w.d_node = j.at("d_node").get<int>();
  w.d_edge = j.at("d_edge").get<int>();
  w.d_pos = j.at("d_pos").get<int>();
  w.atom_width = j.at("atom_width").get<int>();
  w.bond_width = j.at("bond_width").get<int>();
  w.time_embedding = j.at("time_embedding").get<bool>();
  return w;
}

RowVec rowvec_from_json(const json& j) {
  RowVec v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<long>(i)) = j[i].get<double>();
  return v;
}

json rowvec_to_json(const RowVec& v) {
  json j = json::array();
  for (long i = 0; i < v.size(); ++i) j.push_back(v(i));
  return j;
}

}  // namespace

NoisyDraw make_noisy_draw(const NoiseSchedule& schedule,
                          const DenseState& clean, int t, Rng& rng,
                          bool center_eps) {
  if (t < 1 || t > schedule.T())
    fail_runtime("draw step ", t, " outside [1, ", schedule.T(), "]");
  const int n = clean.n();
  NoisyDraw draw;
  draw.t = t;
  draw.eps = rng.normal_matrix(n, 3);
  if (center_eps) draw.eps = project_rows_zero_mean(draw.eps);
  draw.noisy.P = schedule.forward_position(clean.P, t, draw.eps);
  draw.noisy.H = sample_onehot_rows(
      discrete_marginal(clean.H, schedule.Qbar_atom(t)), rng);
  draw.noisy.E = sample_symmetric_onehot(
      discrete_marginal(clean.E, schedule.Qbar_bond(t)), n, rng);
  return draw;
}

DiffusionLossGraph diffusion_loss_graph(const DenoiserModel& model,
                                        nn::TapeBinding& p,
                                        const DenseState& clean,
                                        const NoisyDraw& draw,
                                        const LossWeights& weights) {
  ad::Tape& tape = p.tape();
  const int n = clean.n();
  auto H = tape.constant(draw.noisy.H);
  auto E = tape.constant(draw.noisy.E);
  auto P = tape.constant(draw.noisy.P);
  auto g = model.build_graph(p, H, E, P, draw.t);

  auto pos_err = tape.sub(g.pred_P0, tape.constant(clean.P));
  auto pos = tape.scale(tape.sum(tape.mul(pos_err, pos_err)),
                        1.0 / (3.0 * n));

  auto atom_ll = tape.mul(tape.log_softmax_rows(g.atom_logits),
                          tape.constant(clean.H));
  auto atoms = tape.scale(tape.sum(atom_ll), -1.0 / n);

  auto bond_ll = tape.mask_rows(
      tape.mul(tape.log_softmax_rows(g.bond_logits), tape.constant(clean.E)),
      off_diagonal_mask(n));
  const double pairs = std::max(1, n * (n - 1));
  auto bonds = tape.scale(tape.sum(bond_ll), -1.0 / pairs);

  auto total = tape.add(
      tape.add(tape.scale(pos, weights.position),
               tape.scale(atoms, weights.atoms)),
      tape.scale(bonds, weights.bonds));

  DiffusionLossGraph out;
  out.total = total;
  out.parts.position = tape.value(pos)(0, 0);
  out.parts.atoms = tape.value(atoms)(0, 0);
  out.parts.bonds = tape.value(bonds)(0, 0);
  out.parts.total = tape.value(total)(0, 0);
  return out;
}

std::vector<EpochStats> train_diffusion(DenoiserModel& model,
                                        const NoiseSchedule& schedule,
                                        const std::vector<DenseState>& train,
                                        const TrainConfig& config, Rng& rng,
                                        const EpochCallback& on_epoch) {
  if (train.empty()) fail_config("training set is empty");
  if (config.epochs < 1) fail_config("epochs must be >= 1");
  if (config.batch_size < 1) fail_config("batch size must be >= 1");
  if (schedule.atom_marginal().size() != model.config().widths.atom_width ||
      schedule.bond_marginal().size() != model.config().widths.bond_width)
    fail_config("schedule marginals do not match the model vocabulary");
  if (schedule.T() != model.config().T)
    fail_config("schedule has ", schedule.T(), " steps, model expects ",
                model.config().T);

  nn::Adam adam(config.adam);
  std::vector<int> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<EpochStats> history;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double t0 = wall_seconds();
    rng.shuffle(order);
    DiffusionLossValues sums;
    std::size_t cursor = 0;
    while (cursor < order.size()) {
      const std::size_t batch_end =
          std::min(order.size(), cursor + config.batch_size);
      nn::GradMap grads;
      for (std::size_t k = cursor; k < batch_end; ++k) {
        const DenseState& clean = train[order[k]];
        const int t = 1 + rng.uniform_int(schedule.T());
        NoisyDraw draw = make_noisy_draw(schedule, clean, t, rng);
        ad::Tape tape;
        nn::TapeBinding p(tape, model.params());
        auto loss = diffusion_loss_graph(model, p, clean, draw,
                                         config.weights);
        tape.backward(loss.total);
        p.accumulate_grads(grads);
        sums.total += loss.parts.total;
        sums.position += loss.parts.position;
        sums.atoms += loss.parts.atoms;
        sums.bonds += loss.parts.bonds;
      }
      const double inv = 1.0 / static_cast<double>(batch_end - cursor);
      for (auto& [name, g] : grads) g *= inv;
      adam.update(model.params(), grads);
      cursor = batch_end;
    }
    EpochStats stats;
    stats.epoch = epoch;
    const double inv_n = 1.0 / static_cast<double>(order.size());
    stats.mean_loss.total = sums.total * inv_n;
    stats.mean_loss.position = sums.position * inv_n;
    stats.mean_loss.atoms = sums.atoms * inv_n;
    stats.mean_loss.bonds = sums.bonds * inv_n;
    stats.seconds = wall_seconds() - t0;
    history.push_back(stats);
    if (on_epoch) on_epoch(stats);
  }
  return history;
}

void save_denoiser_checkpoint(const std::string& dir,
                              const DenoiserModel& model,
                              const NoiseSchedule& schedule,
                              const std::vector<EpochStats>& history) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail_runtime("cannot create checkpoint directory ", dir);

  json config;
  config["model"] = widths_to_json(model.config().widths);
  config["model"]["T"] = model.config().T;
  config["schedule"] = {{"kind", schedule.kind()}, {"T", schedule.T()}};
  config["atom_marginal"] = rowvec_to_json(schedule.atom_marginal());
  config["bond_marginal"] = rowvec_to_json(schedule.bond_marginal());
  {
    std::ofstream out(dir + "/config.json");
    if (!out) fail_runtime("cannot write ", dir, "/config.json");
    out << config.dump(2) << "\n";
  }
  write_archive(dir + "/params.bin", model.params().all());
  {
    std::ofstream out(dir + "/metrics.csv");
    if (!out) fail_runtime("cannot write ", dir, "/metrics.csv");
    out << "epoch,loss_total,loss_position,loss_atoms,loss_bonds,seconds\n";
    for (const auto& s : history)
      out << s.epoch << "," << s.mean_loss.total << "," << s.mean_loss.position
          << "," << s.mean_loss.atoms << "," << s.mean_loss.bonds << ","
          << s.seconds << "\n";
  }
}

LoadedDenoiser load_denoiser_checkpoint(const std::string& dir) {
  std::ifstream in(dir + "/config.json");
  if (!in) fail_runtime("cannot open checkpoint config ", dir, "/config.json");
  json config = json::parse(in, nullptr, true);

  DenoiserConfig model_config;
  model_config.widths = widths_from_json(config.at("model"));
  model_config.T = config.at("model").at("T").get<int>();

  ScheduleConfig schedule_config;
  schedule_config.kind = config.at("schedule").at("kind").get<std::string>();
  schedule_config.T = config.at("schedule").at("T").get<int>();

  RowVec atom_marginal = rowvec_from_json(config.at("atom_marginal"));
  RowVec bond_marginal = rowvec_from_json(config.at("bond_marginal"));

  nn::ParamStore params;
  for (auto& [name, value] : read_archive(dir + "/params.bin"))
    params.create(name, static_cast<int>(value.rows()),
                  static_cast<int>(value.cols())) = value;

  return {DenoiserModel(model_config, std::move(params)),
          NoiseSchedule(schedule_config, std::move(atom_marginal),
                        std::move(bond_marginal))};
}

}  // namespace pmol
