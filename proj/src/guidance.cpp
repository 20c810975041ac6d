//
// Project promptmol - Copyright 2026 the promptmol authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "pmol/guidance.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <utility>

#include "pmol/fingerprint.hpp"

namespace pmol {
namespace {

void check_finite_tilt(const Mat& g, const char* block) {
  if (g.size() == 0 || g.allFinite()) return;
  std::ostringstream where;
  for (int r = 0; r < g.rows() && where.str().size() < 160; ++r)
    for (int c = 0; c < g.cols(); ++c)
      if (!std::isfinite(g(r, c))) where << " (" << r << "," << c << ")";
  fail_runtime("non-finite ", block, " guidance gradient at", where.str());
}

// Extras are appended one at a time: type draw, position row (3 normals),
// then bond categories to every existing atom in index order.
DenseState append_marginal_atoms(const DenseState& state,
                                 const NoiseSchedule& schedule, int count,
                                 const Vec3& position_center, Rng& rng) {
  if (count <= 0) return state;
  const int n0 = state.n();
  const int n = n0 + count;
  const int a = static_cast<int>(state.H.cols());
  const int b = static_cast<int>(state.E.cols());
  DenseState out;
  out.H = Mat::Zero(n, a);
  out.H.topRows(n0) = state.H;
  out.P = Mat::Zero(n, 3);
  out.P.topRows(n0) = state.P;
  out.E = Mat::Zero(static_cast<long>(n) * n, b);
  for (int i = 0; i < n0; ++i)
    for (int j = 0; j < n0; ++j)
      out.E.row(edge_index(i, j, n)) = state.E.row(edge_index(i, j, n0));
  for (int i = n0; i < n; ++i) out.E(edge_index(i, i, n), kBondNone) = 1.0;

  for (int e = n0; e < n; ++e) {
    out.H(e, rng.categorical(schedule.atom_marginal())) = 1.0;
    for (int c = 0; c < 3; ++c) out.P(e, c) = position_center(c) + rng.normal();
    for (int j = 0; j < e; ++j) {
      const int cat = rng.categorical(schedule.bond_marginal());
      out.E(edge_index(e, j, n), cat) = 1.0;
      out.E(edge_index(j, e, n), cat) = 1.0;
    }
  }
  return out;
}

void impose_protected(DenseState& state, const DenseState& clean,
                      const std::vector<int>& atoms) {
  const int n = state.n();
  for (int i : atoms) {
    state.H.row(i) = clean.H.row(i);
    state.P.row(i) = clean.P.row(i);
  }
  for (int i : atoms)
    for (int j : atoms)
      state.E.row(edge_index(i, j, n)) = clean.E.row(edge_index(i, j, n));
}

Molecule subset_molecule(const Molecule& mol, const std::vector<int>& keep) {
  std::vector<int> types;
  types.reserve(keep.size());
  Mat positions(static_cast<long>(keep.size()), 3);
  Eigen::MatrixXi bonds(keep.size(), keep.size());
  for (std::size_t r = 0; r < keep.size(); ++r) {
    types.push_back(mol.atom_type(keep[r]));
    positions.row(static_cast<long>(r)) = mol.positions().row(keep[r]);
    for (std::size_t c = 0; c < keep.size(); ++c)
      bonds(static_cast<int>(r), static_cast<int>(c)) =
          mol.bond(keep[r], keep[c]);
  }
  return Molecule(mol.vocab_ptr(), std::move(types), std::move(bonds),
                  std::move(positions));
}

// Decode and drop those of the listed atoms that ended up with no bonds.
std::pair<Molecule, int> decode_with_drops(const DenseState& state,
                                           VocabPtr vocab,
                                           const std::vector<int>& droppable,
                                           bool allow_drop) {
  Molecule decoded = decode_state(state, vocab);
  if (!allow_drop || droppable.empty()) return {decoded, 0};
  const int n = decoded.atom_count();
  std::set<int> drop;
  for (int e : droppable) {
    bool bonded = false;
    for (int j = 0; j < n && !bonded; ++j)
      bonded = j != e && decoded.bond(e, j) != kBondNone;
    if (!bonded) drop.insert(e);
  }
  if (drop.empty() || static_cast<int>(drop.size()) == n)
    return {decoded, 0};
  std::vector<int> keep;
  for (int i = 0; i < n; ++i)
    if (!drop.count(i)) keep.push_back(i);
  return {subset_molecule(decoded, keep), static_cast<int>(drop.size())};
}

int resolve_partial_T(const GuidanceConfig& config, const NoiseSchedule& s) {
  if (config.partial_T < 0 || config.partial_T > s.T())
    fail_config("partial_T ", config.partial_T, " outside [0, ", s.T(), "]");
  return config.partial_T;
}

GuidanceConfig without_centering(GuidanceConfig config) {
  config.centered_gauge = false;
  return config;
}

}  // namespace

double GuidanceConfig::lambda_eff() const {
  if (lambda < 0.0) fail_config("guidance strength must be >= 0, got ", lambda);
  if (!(sigma_y > 0.0))
    fail_config("guidance bandwidth must be > 0, got ", sigma_y);
  return lambda / (sigma_y * sigma_y);
}

Mat manifold_project(const Mat& df, const Mat& score_direction,
                     bool unconditional) {
  if (df.rows() != score_direction.rows() ||
      df.cols() != score_direction.cols())
    fail_runtime("manifold projection shape mismatch");
  const double norm = score_direction.norm();
  if (norm < 1e-12) return df;
  const Mat u = score_direction / norm;
  const double s = (df.array() * u.array()).sum();
  if (s >= 0.0 && !unconditional) return df;
  return df - s * u;
}

Mat tilted_gaussian_mean(const Mat& mean, double variance, const Mat& grad,
                         double lambda_eff) {
  if (grad.size() == 0) return mean;
  if (grad.rows() != mean.rows() || grad.cols() != mean.cols())
    fail_runtime("position tilt shape mismatch");
  return mean - lambda_eff * variance * grad;
}

Mat tilted_categorical_rows(const Mat& rows, const Mat& grads,
                            double lambda_eff) {
  if (grads.size() == 0) return rows;
  if (grads.rows() != rows.rows() || grads.cols() != rows.cols())
    fail_runtime("categorical tilt shape mismatch");
  Mat out(rows.rows(), rows.cols());
  for (int r = 0; r < rows.rows(); ++r) {
    RowVec x = -lambda_eff * grads.row(r);
    RowVec w = (x.array() - x.maxCoeff()).exp();
    RowVec tilted = rows.row(r).cwiseProduct(w);
    const double norm = tilted.sum();
    if (!(norm > 0.0) || !tilted.allFinite())
      fail_runtime("tilted categorical row ", r, " has zero mass");
    out.row(r) = tilted / norm;
  }
  return out;
}

DenseState sample_prior_state(const NoiseSchedule& schedule, int n, Rng& rng,
                              bool centered) {
  if (n < 1) fail_config("prior draw needs at least one atom, got ", n);
  DenseState state;
  state.P = rng.normal_matrix(n, 3);
  if (centered) state.P = project_rows_zero_mean(state.P);
  Mat atom_probs = schedule.atom_marginal().replicate(n, 1);
  state.H = sample_onehot_rows(atom_probs, rng);
  Mat bond_probs =
      schedule.bond_marginal().replicate(static_cast<long>(n) * n, 1);
  state.E = sample_symmetric_onehot(bond_probs, n, rng);
  return state;
}

DenseState ancestral_step(const DenoiserModel& model,
                          const NoiseSchedule& schedule,
                          const DenseState& state, int t, Rng& rng,
                          const GuidanceConfig& config,
                          const GuidanceProvider& provider) {
  const int n = state.n();
  const double lambda_eff = config.lambda_eff();
  DenoiserOutput out = model.forward(state, t);
  const Mat atom_probs = out.atom_probs();
  const Mat bond_probs = out.bond_probs();

  GuidanceGradients tilt;
  const bool guided = config.lambda != 0.0 && provider;
  if (guided) {
    DenseState predicted{atom_probs, bond_probs, out.pred_P0};
    tilt = provider(predicted, t);
    check_finite_tilt(tilt.d_positions, "position");
    check_finite_tilt(tilt.d_atoms, "atom");
    check_finite_tilt(tilt.d_bonds, "bond");
  }

  auto posterior = schedule.posterior_position(state.P, out.pred_P0, t);
  Mat mean = posterior.mean;
  if (guided && tilt.d_positions.size() != 0) {
    Mat df = tilt.d_positions;
    if (config.manifold_constraint) {
      const Mat direction =
          std::sqrt(schedule.alpha_bar(t)) * out.pred_P0 - state.P;
      df = manifold_project(df, direction, config.unconditional_projection);
    }
    if (config.centered_gauge) df = project_rows_zero_mean(df);
    mean = tilted_gaussian_mean(mean, posterior.variance, df, lambda_eff);
  }
  Mat noise = rng.normal_matrix(n, 3);
  if (config.centered_gauge) noise = project_rows_zero_mean(noise);
  DenseState next;
  next.P = mean + std::sqrt(posterior.variance) * noise;

  Mat atom_post = schedule.posterior_discrete(state.H, atom_probs, t, false);
  if (guided && tilt.d_atoms.size() != 0)
    atom_post = tilted_categorical_rows(atom_post, tilt.d_atoms, lambda_eff);
  next.H = sample_onehot_rows(atom_post, rng);

  Mat bond_post = schedule.posterior_discrete(state.E, bond_probs, t, true);
  if (guided && tilt.d_bonds.size() != 0)
    bond_post = tilted_categorical_rows(bond_post, tilt.d_bonds, lambda_eff);
  next.E = sample_symmetric_onehot(bond_post, n, rng);
  return next;
}

DenseState run_reverse(const DenoiserModel& model,
                       const NoiseSchedule& schedule, DenseState state,
                       int from_t, Rng& rng, const GuidanceConfig& config,
                       const GuidanceProvider& provider,
                       const StepHooks& hooks) {
  if (from_t < 0 || from_t > schedule.T())
    fail_config("reverse start ", from_t, " outside [0, ", schedule.T(), "]");
  for (int t = from_t; t >= 1; --t) {
    state = ancestral_step(model, schedule, state, t, rng, config, provider);
    if (hooks.after_step) hooks.after_step(t, state);
  }
  return state;
}

Molecule sample_molecule(const DenoiserModel& model,
                         const NoiseSchedule& schedule, int n_atoms,
                         VocabPtr vocab, Rng& rng) {
  DenseState state = sample_prior_state(schedule, n_atoms, rng, true);
  state = run_reverse(model, schedule, std::move(state), schedule.T(), rng);
  return decode_state(state, std::move(vocab));
}

int choose_partial_T(const Molecule& M0, const DenoiserModel& model,
                     const NoiseSchedule& schedule,
                     const GuidanceConfig& config, Rng& rng,
                     const std::string& preset) {
  const int T = schedule.T();
  const bool has_band = config.similarity_lo >= 0.0;
  if (!has_band) {
    int value = 0;
    if (preset == "500") {
      value = std::min(500, T);
    } else if (preset == "800") {
      value = std::min(800, T);
    } else {
      try {
        value = std::stoi(preset);
      } catch (const std::exception&) {
        fail_config("unknown partial_T preset \"", preset, "\"");
      }
    }
    if (value < 1 || value > T)
      fail_config("partial_T preset ", value, " outside [1, ", T, "]");
    return value;
  }
  if (config.similarity_lo > config.similarity_hi ||
      config.similarity_hi > 1.0)
    fail_config("similarity band [", config.similarity_lo, ", ",
                config.similarity_hi, "] is not within [0, 1]");

  std::vector<int> candidates;
  for (int denom = 1; denom <= 16; denom *= 2) {
    const int cand = std::max(1, T / denom);
    if (candidates.empty() || candidates.back() != cand)
      candidates.push_back(cand);
  }
  const DenseState clean = to_dense_state(M0);
  const Fingerprint base = ecfp(M0);
  constexpr int kProbes = 4;
  for (int cand : candidates) {
    double total = 0.0;
    for (int probe = 0; probe < kProbes; ++probe) {
      NoisyDraw draw = make_noisy_draw(schedule, clean, cand, rng);
      DenseState probe_state =
          run_reverse(model, schedule, std::move(draw.noisy), cand, rng);
      total += tanimoto(base, ecfp(decode_state(probe_state, M0.vocab_ptr())));
    }
    const double mean = total / kProbes;
    if (mean >= config.similarity_lo && mean <= config.similarity_hi)
      return cand;
  }
  log_warn("no candidate noising depth hit the similarity band, using ",
           candidates.back());
  return candidates.back();
}

Mat translate_rows_to_center(Mat rows, const Vec3& target) {
  if (rows.rows() < 1 || rows.cols() != 3)
    fail_runtime("translation expects non-empty n x 3 rows");
  const RowVec shift = target.transpose() - rows.colwise().mean();
  rows.rowwise() += shift;
  return rows;
}

OptimizationResult optimize_flexible(const Molecule& M0,
                                     const DenoiserModel& model,
                                     const NoiseSchedule& schedule,
                                     const GuidanceConfig& config,
                                     const OptimizationTask& task, Rng& rng,
                                     const GuidanceProvider& provider,
                                     const StepHooks& hooks) {
  if (task.n_extra < 0) fail_config("extra atom count must be >= 0");
  const int partial_T = resolve_partial_T(config, schedule);
  if (partial_T == 0 && task.n_extra == 0)
    return {M0, 0, 0};

  DenseState state = to_dense_state(M0);
  const Vec3 com = center_of_positions(M0.positions());
  state = append_marginal_atoms(state, schedule, task.n_extra, com, rng);
  const int n0 = M0.atom_count();
  std::vector<int> extras;
  for (int e = n0; e < state.n(); ++e) extras.push_back(e);

  const Vec3 removed = center_state_positions(state);
  if (partial_T > 0) {
    NoisyDraw draw = make_noisy_draw(schedule, state, partial_T, rng);
    state = run_reverse(model, schedule, std::move(draw.noisy), partial_T, rng,
                        config, provider, hooks);
  }
  auto [mol, dropped] = decode_with_drops(state, M0.vocab_ptr(), extras,
                                          task.drop_disconnected_extras);
  Mat positions = mol.positions();
  positions.rowwise() += removed.transpose();
  mol.set_positions(std::move(positions));
  return {std::move(mol), partial_T, dropped};
}

OptimizationResult optimize_constrained(const Molecule& M0,
                                        const DenoiserModel& model,
                                        const NoiseSchedule& schedule,
                                        const GuidanceConfig& config,
                                        const OptimizationTask& task, Rng& rng,
                                        const GuidanceProvider& provider,
                                        const StepHooks& hooks) {
  const int n0 = M0.atom_count();
  std::vector<int> prot = task.protected_atoms;
  std::sort(prot.begin(), prot.end());
  prot.erase(std::unique(prot.begin(), prot.end()), prot.end());
  for (int i : prot)
    if (i < 0 || i >= n0)
      fail_config("protected atom ", i, " outside [0, ", n0 - 1, "]");
  if (static_cast<int>(prot.size()) == n0 && task.n_extra == 0)
    fail_config("every atom is protected and no extras requested: ",
                "nothing to optimize");

  const GuidanceConfig cfg = without_centering(config);
  const int partial_T = resolve_partial_T(cfg, schedule);
  DenseState clean = to_dense_state(M0);
  clean = append_marginal_atoms(clean, schedule, task.n_extra,
                                center_of_positions(M0.positions()), rng);
  std::vector<int> extras;
  for (int e = n0; e < clean.n(); ++e) extras.push_back(e);

  DenseState state = clean;
  if (partial_T > 0) {
    NoisyDraw draw = make_noisy_draw(schedule, clean, partial_T, rng, false);
    state = std::move(draw.noisy);
    impose_protected(state, clean, prot);
    for (int t = partial_T; t >= 1; --t) {
      state = ancestral_step(model, schedule, state, t, rng, cfg, provider);
      impose_protected(state, clean, prot);
      if (hooks.after_step) hooks.after_step(t, state);
    }
  }
  auto [mol, dropped] = decode_with_drops(state, M0.vocab_ptr(), extras,
                                          task.drop_disconnected_extras);
  return {std::move(mol), partial_T, dropped};
}

OptimizationResult optimize_site(const Molecule& M0, const DenoiserModel& model,
                                 const NoiseSchedule& schedule,
                                 const GuidanceConfig& config,
                                 const OptimizationTask& task, Rng& rng,
                                 const GuidanceProvider& provider,
                                 const StepHooks& hooks) {
  if (task.anchors.empty()) fail_config("site optimization needs anchors");
  if (task.n_new < 1) fail_config("site optimization needs n_new >= 1");
  if (task.k_hop < 0) fail_config("k_hop must be >= 0");
  const int n0 = M0.atom_count();

  // Appointed atoms: nearest atom to each anchor, within the radius.
  std::set<int> appointed_set;
  Vec3 anchor_mean = Vec3::Zero();
  for (const Vec3& anchor : task.anchors) {
    anchor_mean += anchor;
    int best = -1;
    double best_d = task.anchor_radius;
    for (int i = 0; i < n0; ++i) {
      const double d = (Vec3(M0.positions().row(i)) - anchor).norm();
      if (d <= best_d) {
        best_d = d;
        best = i;
      }
    }
    if (best < 0)
      fail_config("anchor (", anchor(0), ", ", anchor(1), ", ", anchor(2),
                  ") is farther than ", task.anchor_radius,
                  " from every atom");
    appointed_set.insert(best);
  }
  anchor_mean /= static_cast<double>(task.anchors.size());

  // Context: k-hop neighborhood of the appointed atoms in the bond graph.
  std::set<int> context(appointed_set);
  std::vector<int> frontier(context.begin(), context.end());
  for (int hop = 0; hop < task.k_hop; ++hop) {
    std::vector<int> next;
    for (int i : frontier)
      for (int j : M0.neighbors(i))
        if (context.insert(j).second) next.push_back(j);
    frontier = std::move(next);
  }
  const std::vector<int> sub_atoms(context.begin(), context.end());
  const int ns = static_cast<int>(sub_atoms.size());

  Molecule sub = subset_molecule(M0, sub_atoms);
  DenseState clean = to_dense_state(sub);
  // New atoms: marginal types, unit-normal positions translated so their
  // center of geometry is the anchor mean.
  clean = append_marginal_atoms(clean, schedule, task.n_new, Vec3::Zero(),
                                rng);
  clean.P.bottomRows(task.n_new) = translate_rows_to_center(
      clean.P.bottomRows(task.n_new), anchor_mean);

  std::vector<int> prot;  // context minus appointed, in subgraph indexing
  for (int s = 0; s < ns; ++s)
    if (!appointed_set.count(sub_atoms[s])) prot.push_back(s);
  std::vector<int> new_atoms;
  for (int e = ns; e < clean.n(); ++e) new_atoms.push_back(e);

  const GuidanceConfig cfg = without_centering(config);
  const int partial_T = resolve_partial_T(cfg, schedule);
  DenseState state = clean;
  if (partial_T > 0) {
    NoisyDraw draw = make_noisy_draw(schedule, clean, partial_T, rng, false);
    state = std::move(draw.noisy);
    impose_protected(state, clean, prot);
    for (int t = partial_T; t >= 1; --t) {
      state = ancestral_step(model, schedule, state, t, rng, cfg, provider);
      impose_protected(state, clean, prot);
      if (hooks.after_step) hooks.after_step(t, state);
    }
  }
  auto [sub_out, dropped] = decode_with_drops(
      state, M0.vocab_ptr(), new_atoms, task.drop_disconnected_extras);

  // Merge: outside atoms keep their rows, the context region is replaced by
  // the optimized subgraph, surviving new atoms go at the end.  Bonds that
  // cross the subgraph boundary keep their original category.
  std::vector<int> outside;
  for (int i = 0; i < n0; ++i)
    if (!context.count(i)) outside.push_back(i);
  const int n_sub_out = sub_out.atom_count();
  const int n_total = static_cast<int>(outside.size()) + n_sub_out;

  std::vector<int> types(n_total);
  Mat positions(n_total, 3);
  Eigen::MatrixXi bonds = Eigen::MatrixXi::Zero(n_total, n_total);
  std::map<int, int> outside_slot, sub_slot;
  int cursor = 0;
  for (int i : outside) {
    outside_slot[i] = cursor;
    types[cursor] = M0.atom_type(i);
    positions.row(cursor) = M0.positions().row(i);
    ++cursor;
  }
  for (int s = 0; s < n_sub_out; ++s) {
    if (s < ns) sub_slot[sub_atoms[s]] = cursor;
    types[cursor] = sub_out.atom_type(s);
    positions.row(cursor) = sub_out.positions().row(s);
    ++cursor;
  }
  for (std::size_t x = 0; x < outside.size(); ++x)
    for (std::size_t y = x + 1; y < outside.size(); ++y) {
      const int c = M0.bond(outside[x], outside[y]);
      bonds(static_cast<int>(x), static_cast<int>(y)) = c;
      bonds(static_cast<int>(y), static_cast<int>(x)) = c;
    }
  for (int i : outside)
    for (const auto& [orig, slot] : sub_slot) {
      const int c = M0.bond(i, orig);
      bonds(outside_slot[i], slot) = c;
      bonds(slot, outside_slot[i]) = c;
    }
  const int sub_base = static_cast<int>(outside.size());
  for (int s = 0; s < n_sub_out; ++s)
    for (int u = s + 1; u < n_sub_out; ++u) {
      const int c = sub_out.bond(s, u);
      bonds(sub_base + s, sub_base + u) = c;
      bonds(sub_base + u, sub_base + s) = c;
    }

  OptimizationResult result{
      Molecule(M0.vocab_ptr(), std::move(types), std::move(bonds),
               std::move(positions)),
      partial_T, dropped};
  return result;
}

}  // namespace pmol
