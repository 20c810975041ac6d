//
// Project promptmol - Copyright 2026 the promptmol authors.
// SPDX-License-Identifier: Apache-2.0
//

#include <doctest.h>

#include <cmath>
#include <vector>

#include "pmol/guidance.hpp"
#include "pmol/toy_corpus.hpp"
#include "reference_molecules.hpp"

using namespace pmol;
namespace ref = pmol::testref;

namespace {

DenoiserConfig tiny_config(int T = 24) {
  DenoiserConfig config;
  config.widths.layers = 1;
  config.widths.d_node = 16;
  config.widths.d_edge = 8;
  config.widths.d_pos = 8;
  config.widths.atom_width =
      static_cast<int>(AtomVocabulary::default_vocabulary()->size());
  config.widths.bond_width = kBondCategoryCount;
  config.T = T;
  return config;
}

NoiseSchedule tiny_schedule(int T = 24) {
  ScheduleConfig config;
  config.T = T;
  config.kind = "cosine";
  const int a = static_cast<int>(AtomVocabulary::default_vocabulary()->size());
  return NoiseSchedule(config, RowVec::Constant(a, 1.0 / a),
                       RowVec::Constant(kBondCategoryCount,
                                        1.0 / kBondCategoryCount));
}

bool states_identical(const DenseState& a, const DenseState& b) {
  return (a.H - b.H).cwiseAbs().maxCoeff() == 0.0 &&
         (a.E - b.E).cwiseAbs().maxCoeff() == 0.0 &&
         (a.P - b.P).cwiseAbs().maxCoeff() == 0.0;
}

}  // namespace

TEST_SUITE("guidance") {

TEST_CASE("manifold projection keeps the score-direction component") {
  Rng rng(701);
  for (int rep = 0; rep < 200; ++rep) {
    const Mat df = rng.normal_matrix(4, 3);
    const Mat dir = rng.normal_matrix(4, 3);
    const Mat projected = manifold_project(df, dir);
    const double unit_scale = dir.norm();
    REQUIRE(unit_scale > 0.0);
    const Mat u = dir / unit_scale;
    const double component = (projected.array() * u.array()).sum();
    CHECK(component >= -1e-12);
    if ((df.array() * u.array()).sum() >= 0.0) {
      // untouched when the update already points along the score
      CHECK((projected - df).cwiseAbs().maxCoeff() == 0.0);
    }
  }
}

TEST_CASE("unconditional projection removes the parallel component") {
  Rng rng(702);
  const Mat df = rng.normal_matrix(3, 3);
  const Mat dir = rng.normal_matrix(3, 3);
  const Mat projected = manifold_project(df, dir, true);
  const Mat u = dir / dir.norm();
  CHECK(std::abs((projected.array() * u.array()).sum()) < 1e-12);
}

TEST_CASE("zero score direction passes gradients through") {
  Rng rng(703);
  const Mat df = rng.normal_matrix(2, 3);
  const Mat projected = manifold_project(df, Mat::Zero(2, 3));
  CHECK((projected - df).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("tilted gaussian mean matches dense quadrature") {
  // One-dimensional check of the conjugate tilt: the exactly computed mean
  // of N(mu, var) reweighted by exp(-lambda g x) against numerical
  // integration on a wide grid.
  const double mu = 0.8, var = 0.35, g = 1.7, lambda = 0.9;
  const Mat mean = Mat::Constant(1, 1, mu);
  const Mat grad = Mat::Constant(1, 1, g);
  const double got = tilted_gaussian_mean(mean, var, grad, lambda)(0, 0);

  const double lo = mu - 30.0, hi = mu + 30.0;
  const int steps = 400000;
  const double h = (hi - lo) / steps;
  double z = 0.0, m1 = 0.0;
  for (int i = 0; i <= steps; ++i) {
    const double x = lo + h * i;
    const double log_w =
        -0.5 * (x - mu) * (x - mu) / var - lambda * g * x;
    const double w = std::exp(log_w) * (i == 0 || i == steps ? 0.5 : 1.0);
    z += w;
    m1 += w * x;
  }
  CHECK(got == doctest::Approx(m1 / z).epsilon(1e-6));
  CHECK(got == doctest::Approx(mu - lambda * var * g).epsilon(1e-12));
}

TEST_CASE("tilted categorical rows match the direct reweighting") {
  Rng rng(704);
  Mat rows(3, 4);
  for (int r = 0; r < 3; ++r) {
    RowVec v(4);
    for (int c = 0; c < 4; ++c) v(c) = rng.uniform() + 0.1;
    rows.row(r) = v / v.sum();
  }
  const Mat grads = rng.normal_matrix(3, 4);
  const double lambda = 2.5;
  const Mat tilted = tilted_categorical_rows(rows, grads, lambda);
  for (int r = 0; r < 3; ++r) {
    CHECK(tilted.row(r).sum() == doctest::Approx(1.0).epsilon(1e-12));
    long double direct[4], total = 0.0;
    for (int c = 0; c < 4; ++c) {
      direct[c] = static_cast<long double>(rows(r, c)) *
                  std::exp(static_cast<long double>(-lambda * grads(r, c)));
      total += direct[c];
    }
    for (int c = 0; c < 4; ++c)
      CHECK(tilted(r, c) ==
            doctest::Approx(static_cast<double>(direct[c] / total))
                .epsilon(1e-10));
  }
  // zero strength reproduces the input bit for bit
  const Mat untouched = tilted_categorical_rows(rows, grads, 0.0);
  CHECK((untouched - rows).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("lambda folds the observation bandwidth") {
  GuidanceConfig config;
  config.lambda = 6.0;
  config.sigma_y = 2.0;
  CHECK(config.lambda_eff() == doctest::Approx(1.5));
  config.sigma_y = 1.0;
  CHECK(config.lambda_eff() == doctest::Approx(6.0));
}

TEST_CASE("prior draws are centered with simplex categories") {
  Rng rng(705);
  NoiseSchedule schedule = tiny_schedule();
  const DenseState state = sample_prior_state(schedule, 6, rng);
  CHECK(state.n() == 6);
  CHECK(state.P.colwise().mean().cwiseAbs().maxCoeff() < 1e-12);
  for (int r = 0; r < 6; ++r) CHECK(state.H.row(r).sum() == doctest::Approx(1.0));
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j)
      CHECK((state.E.row(edge_index(i, j, 6)) -
             state.E.row(edge_index(j, i, 6)))
                .cwiseAbs()
                .maxCoeff() == 0.0);
}

TEST_CASE("zero guidance strength is bit-identical to unguided sampling") {
  Rng init_rng(706);
  DenoiserModel model(tiny_config(), init_rng);
  NoiseSchedule schedule = tiny_schedule();

  GuidanceProvider provider = [](const DenseState& predicted, int) {
    GuidanceGradients g;
    g.d_positions = Mat::Constant(predicted.n(), 3, 0.5);
    return g;
  };

  Rng a(707), b(707);
  const DenseState start_a = sample_prior_state(schedule, 5, a);
  const DenseState start_b = sample_prior_state(schedule, 5, b);
  REQUIRE(states_identical(start_a, start_b));

  GuidanceConfig unguided;
  GuidanceConfig zero_lambda;
  zero_lambda.lambda = 0.0;
  zero_lambda.manifold_constraint = true;

  const DenseState end_a =
      run_reverse(model, schedule, start_a, schedule.T(), a, unguided);
  const DenseState end_b = run_reverse(model, schedule, start_b, schedule.T(),
                                       b, zero_lambda, provider);
  CHECK(states_identical(end_a, end_b));
}

TEST_CASE("guidance moves predictions along the objective") {
  Rng init_rng(708);
  DenoiserModel model(tiny_config(), init_rng);
  NoiseSchedule schedule = tiny_schedule();

  // Objective pulls every coordinate toward +infinity along x.
  GuidanceProvider provider = [](const DenseState& predicted, int) {
    GuidanceGradients g;
    g.d_positions = Mat::Zero(predicted.n(), 3);
    g.d_positions.col(0).setConstant(-1.0);  // minimize -x
    return g;
  };

  GuidanceConfig plain_config;
  plain_config.centered_gauge = false;
  GuidanceConfig guided = plain_config;
  guided.lambda = 50.0;

  Rng a(709);
  const DenseState start = sample_prior_state(schedule, 5, a, false);
  Rng run_a(710), run_b(710);
  const DenseState plain =
      run_reverse(model, schedule, start, schedule.T(), run_a, plain_config);
  const DenseState pushed = run_reverse(model, schedule, start, schedule.T(),
                                        run_b, guided, provider);
  CHECK(pushed.P.col(0).mean() > plain.P.col(0).mean());
}

TEST_CASE("ancestral steps count down through hooks") {
  Rng init_rng(711);
  DenoiserModel model(tiny_config(), init_rng);
  NoiseSchedule schedule = tiny_schedule();
  Rng rng(712);
  DenseState start = sample_prior_state(schedule, 4, rng);

  std::vector<int> seen;
  StepHooks hooks;
  hooks.after_step = [&](int t, const DenseState& state) {
    seen.push_back(t);
    CHECK(state.n() == 4);
  };
  run_reverse(model, schedule, start, 6, rng, GuidanceConfig{}, {}, hooks);
  REQUIRE(seen.size() == 6);
  for (int k = 0; k < 6; ++k) CHECK(seen[k] == 6 - k);
}

TEST_CASE("constrained optimization preserves the protected region") {
  Rng init_rng(713);
  DenoiserModel model(tiny_config(), init_rng);
  NoiseSchedule schedule = tiny_schedule();
  Molecule mol = ref::ethanol();
  const DenseState clean = to_dense_state(mol);
  const int n = mol.atom_count();

  Rng mask_rng(714);
  for (int trial = 0; trial < 2; ++trial) {
    std::vector<int> prot;
    for (int i = 0; i < n; ++i)
      if (mask_rng.uniform() < 0.5) prot.push_back(i);
    if (prot.empty()) prot.push_back(0);
    if (static_cast<int>(prot.size()) == n) prot.pop_back();

    OptimizationTask task;
    task.variant = "constrained";
    task.protected_atoms = prot;
    GuidanceConfig config;
    config.partial_T = 10;

    int checked_steps = 0;
    StepHooks hooks;
    hooks.after_step = [&](int, const DenseState& state) {
      ++checked_steps;
      for (int i : prot) {
        CHECK((state.H.row(i) - clean.H.row(i)).cwiseAbs().maxCoeff() == 0.0);
        CHECK((state.P.row(i) - clean.P.row(i)).cwiseAbs().maxCoeff() <
              1e-9);
        for (int j : prot)
          CHECK((state.E.row(edge_index(i, j, n)) -
                 clean.E.row(edge_index(i, j, n)))
                    .cwiseAbs()
                    .maxCoeff() == 0.0);
      }
    };
    Rng run_rng(715 + trial);
    const OptimizationResult result = optimize_constrained(
        mol, model, schedule, config, task, run_rng, {}, hooks);
    CHECK(checked_steps == 10);
    CHECK(result.used_partial_T == 10);
    // protected atoms survive into the decoded molecule unchanged
    for (int i : prot) {
      CHECK(result.molecule.atom_type(i) == mol.atom_type(i));
      for (int j : prot)
        CHECK(result.molecule.bond(i, j) == mol.bond(i, j));
      CHECK((result.molecule.positions().row(i) - mol.positions().row(i))
                .cwiseAbs()
                .maxCoeff() < 1e-9);
    }
  }
}

TEST_CASE("site optimization seeds new atoms at the anchor mean") {
  Rng init_rng(716);
  DenoiserModel model(tiny_config(), init_rng);
  NoiseSchedule schedule = tiny_schedule();
  Molecule mol = ref::ethanol();

  OptimizationTask task;
  task.variant = "site";
  task.anchors = {Vec3(0.2, 0.1, 0.0), Vec3(1.0, 0.5, 0.2)};
  task.anchor_radius = 5.0;
  task.k_hop = 1;
  task.n_new = 3;
  task.drop_disconnected_extras = false;

  // With no reverse steps the output exposes the initialization directly.
  GuidanceConfig config;
  config.partial_T = 0;
  Rng run_rng(717);
  const OptimizationResult result =
      optimize_site(mol, model, schedule, config, task, run_rng);
  const Vec3 anchor_mean = (task.anchors[0] + task.anchors[1]) / 2.0;
  const int n_out = result.molecule.atom_count();
  REQUIRE(n_out == mol.atom_count() + task.n_new);
  const Mat seeded = result.molecule.positions().bottomRows(task.n_new);
  const Vec3 seeded_mean = seeded.colwise().mean().transpose();
  CHECK((seeded_mean - anchor_mean).norm() < 1e-9);
  CHECK(result.atoms_dropped == 0);
}

TEST_CASE("row translation recenters exactly") {
  Rng rng(718);
  for (int rep = 0; rep < 10; ++rep) {
    const Mat rows = 5.0 * rng.normal_matrix(4, 3);
    const Vec3 target(rng.normal(), rng.normal(), rng.normal());
    const Mat moved = translate_rows_to_center(rows, target);
    const Vec3 mean = moved.colwise().mean().transpose();
    CHECK((mean - target).norm() < 1e-9);
    // translation only: row differences are untouched
    for (int r = 1; r < 4; ++r)
      CHECK(((moved.row(r) - moved.row(0)) - (rows.row(r) - rows.row(0)))
                .cwiseAbs()
                .maxCoeff() < 1e-12);
  }
}

TEST_CASE("flexible optimization with zero depth returns the input") {
  Rng init_rng(719);
  DenoiserModel model(tiny_config(), init_rng);
  NoiseSchedule schedule = tiny_schedule();
  Molecule mol = ref::water();
  GuidanceConfig config;
  config.partial_T = 0;
  OptimizationTask task;
  Rng rng(720);
  const OptimizationResult result =
      optimize_flexible(mol, model, schedule, config, task, rng);
  CHECK(result.used_partial_T == 0);
  CHECK(result.molecule.atom_types() == mol.atom_types());
  CHECK((result.molecule.positions() - mol.positions())
            .cwiseAbs()
            .maxCoeff() == 0.0);
}

TEST_CASE("preset depths clamp to the schedule") {
  Rng init_rng(721);
  DenoiserModel model(tiny_config(), init_rng);
  NoiseSchedule schedule = tiny_schedule();
  Molecule mol = ref::water();
  GuidanceConfig config;
  Rng rng(722);
  CHECK(choose_partial_T(mol, model, schedule, config, rng, "500") ==
        schedule.T());
  CHECK(choose_partial_T(mol, model, schedule, config, rng, "12") == 12);
  CHECK_THROWS(choose_partial_T(mol, model, schedule, config, rng, "junk"));
}

TEST_CASE("similarity bands pick a depth inside the schedule") {
  Rng init_rng(723);
  DenoiserModel model(tiny_config(), init_rng);
  NoiseSchedule schedule = tiny_schedule();
  Molecule mol = ref::ethanol();
  GuidanceConfig config;
  config.similarity_lo = 0.0;
  config.similarity_hi = 1.0;  // any similarity accepted: largest candidate
  Rng rng(724);
  const int chosen = choose_partial_T(mol, model, schedule, config, rng);
  CHECK(chosen >= 1);
  CHECK(chosen <= schedule.T());
}

TEST_CASE("invalid optimization tasks are rejected") {
  Rng init_rng(725);
  DenoiserModel model(tiny_config(), init_rng);
  NoiseSchedule schedule = tiny_schedule();
  Molecule mol = ref::water();
  GuidanceConfig config;
  config.partial_T = 5;
  Rng rng(726);

  OptimizationTask bad_protected;
  bad_protected.protected_atoms = {99};
  CHECK_THROWS(optimize_constrained(mol, model, schedule, config,
                                    bad_protected, rng));

  OptimizationTask no_anchor;
  no_anchor.n_new = 1;
  CHECK_THROWS(optimize_site(mol, model, schedule, config, no_anchor, rng));

  OptimizationTask far_anchor;
  far_anchor.anchors = {Vec3(100.0, 100.0, 100.0)};
  far_anchor.anchor_radius = 1.0;
  CHECK_THROWS(optimize_site(mol, model, schedule, config, far_anchor, rng));
}

}  // TEST_SUITE
