//
// Project promptmol - Copyright 2026 the promptmol authors.
// SPDX-License-Identifier: Apache-2.0
//

#ifndef PMOL_GUIDANCE_HPP
#define PMOL_GUIDANCE_HPP

#include <functional>
#include <string>
#include <vector>

#include "pmol/trainer.hpp"

namespace pmol {

// Gradients of a scalar objective to be minimized, evaluated at the model's
// predicted clean state (positions real, category rows on the simplex).
// Empty matrices mean "no tilt for that block".  Bond gradients are expected
// symmetric across ordered pairs.
struct GuidanceGradients {
  Mat d_positions;  // n x 3
  Mat d_atoms;      // n x a
  Mat d_bonds;      // (n*n) x b
};

using GuidanceProvider =
    std::function<GuidanceGradients(const DenseState& predicted_clean, int t)>;

struct GuidanceConfig {
  double lambda = 0.0;   // tilt strength; 0 disables guidance entirely
  double sigma_y = 1.0;  // observation bandwidth, folded in as lambda/sigma_y^2
  int partial_T = 0;     // noising depth for optimization runs
  bool manifold_constraint = false;
  // Subtract the parallel component even when it already points along the
  // score direction (the unconditional reading of the projection rule).
  bool unconditional_projection = false;
  bool identity_split = true;  // consumed when prompts are embedded
  // Keep the chain in the zero-center-of-geometry gauge (free runs).  The
  // constrained and site drivers clear it: re-centering would move the
  // protected context.
  bool centered_gauge = true;
  double similarity_lo = -1.0;  // optional Tanimoto band for choose_partial_T
  double similarity_hi = -1.0;

  double lambda_eff() const;
};

// Drops the component of df opposing the score direction: with u the unit
// score direction and s = <df, u>, returns df - s u when s < 0 (or always,
// when unconditional).  Shapes must match; zero direction passes through.
Mat manifold_project(const Mat& df, const Mat& score_direction,
                     bool unconditional = false);

// Mean of N(mean, variance I) exponentially tilted by exp(-lambda_eff g.x):
// the product is again Gaussian with mean - lambda_eff variance g.
Mat tilted_gaussian_mean(const Mat& mean, double variance, const Mat& grad,
                         double lambda_eff);

// Per-row reweighting of categorical probabilities by exp(-lambda_eff g),
// renormalized.  Rows are stabilized by their max exponent before exp.
Mat tilted_categorical_rows(const Mat& rows, const Mat& grads,
                            double lambda_eff);

// Converged-chain draw: positions standard normal (column-centered when
// `centered`), categories from the schedule marginals.  Draw order is
// positions, atoms, then bonds.
DenseState sample_prior_state(const NoiseSchedule& schedule, int n, Rng& rng,
                              bool centered = true);

struct StepHooks {
  // Called after each reverse step (and after any constraint re-imposition)
  // with the step index t just consumed; the state is then at t - 1.
  std::function<void(int t, const DenseState& state)> after_step;
};

// One reverse transition t -> t-1.  The random draws (position noise, atom
// categories, bond categories) happen in a fixed order independent of the
// guidance settings, so lambda = 0 is bit-identical to unguided sampling
// under a shared stream.
DenseState ancestral_step(const DenoiserModel& model,
                          const NoiseSchedule& schedule,
                          const DenseState& state, int t, Rng& rng,
                          const GuidanceConfig& config = {},
                          const GuidanceProvider& provider = {});

DenseState run_reverse(const DenoiserModel& model,
                       const NoiseSchedule& schedule, DenseState state,
                       int from_t, Rng& rng, const GuidanceConfig& config = {},
                       const GuidanceProvider& provider = {},
                       const StepHooks& hooks = {});

Molecule sample_molecule(const DenoiserModel& model,
                         const NoiseSchedule& schedule, int n_atoms,
                         VocabPtr vocab, Rng& rng);

// Noising depth selection.  With a similarity band set in `config`, scans a
// geometric grid of candidates from T downward, noising M0 to the candidate
// depth and denoising 4 unguided probe replicas; picks the largest candidate
// whose mean Tanimoto to M0 lands in the band (smallest candidate, with a
// warning, when none does).  Without a band, resolves `preset`: "500"/"800"
// (clamped to T) or a number.
int choose_partial_T(const Molecule& M0, const DenoiserModel& model,
                     const NoiseSchedule& schedule,
                     const GuidanceConfig& config, Rng& rng,
                     const std::string& preset = "500");

struct OptimizationTask {
  std::string variant = "flexible";  // flexible | constrained | site
  std::vector<int> protected_atoms;  // constrained: atoms (and bonds among
                                     // them) that must survive bit-exact
  std::vector<Vec3> anchors;         // site: appointed positions
  int k_hop = 1;                     // site: context radius in bonds
  int n_new = 1;                     // site: atoms seeded at the anchors
  int n_extra = 0;                   // flexible/constrained: appended atoms
  double anchor_radius = 3.0;        // site: max anchor-to-atom distance
  bool drop_disconnected_extras = true;
};

struct OptimizationResult {
  Molecule molecule;
  int used_partial_T = 0;
  int atoms_dropped = 0;
};

OptimizationResult optimize_flexible(const Molecule& M0,
                                     const DenoiserModel& model,
                                     const NoiseSchedule& schedule,
                                     const GuidanceConfig& config,
                                     const OptimizationTask& task, Rng& rng,
                                     const GuidanceProvider& provider = {},
                                     const StepHooks& hooks = {});

OptimizationResult optimize_constrained(const Molecule& M0,
                                        const DenoiserModel& model,
                                        const NoiseSchedule& schedule,
                                        const GuidanceConfig& config,
                                        const OptimizationTask& task, Rng& rng,
                                        const GuidanceProvider& provider = {},
                                        const StepHooks& hooks = {});

OptimizationResult optimize_site(const Molecule& M0, const DenoiserModel& model,
                                 const NoiseSchedule& schedule,
                                 const GuidanceConfig& config,
                                 const OptimizationTask& task, Rng& rng,
                                 const GuidanceProvider& provider = {},
                                 const StepHooks& hooks = {});

// Rigid translation taking the rows' arithmetic mean onto `target`.
Mat translate_rows_to_center(Mat rows, const Vec3& target);

}  // namespace pmol

#endif  // PMOL_GUIDANCE_HPP
