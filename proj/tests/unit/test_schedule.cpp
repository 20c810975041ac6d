//
// Project promptmol - Copyright 2026 the promptmol authors.
// SPDX-License-Identifier: Apache-2.0
//

#include <doctest.h>

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "pmol/rng.hpp"
#include "pmol/schedule.hpp"

using namespace pmol;
using oracles::random_simplex;

namespace {

const Mat& step_matrix(const NoiseSchedule& schedule, int t, bool bonds) {
  return bonds ? schedule.Q_bond(t) : schedule.Q_atom(t);
}

const Mat& cumulative_matrix(const NoiseSchedule& schedule, int t, bool bonds) {
  return bonds ? schedule.Qbar_bond(t) : schedule.Qbar_atom(t);
}

NoiseSchedule small_schedule(const std::string& kind, int T, int m_atom,
                             int m_bond, Rng& rng) {
  ScheduleConfig config;
  config.T = T;
  config.kind = kind;
  return NoiseSchedule(config, random_simplex(rng, m_atom),
                       random_simplex(rng, m_bond));
}

}  // namespace

TEST_SUITE("schedule") {

TEST_CASE("betas and cumulative products are well formed") {
  Rng rng(3);
  for (const char* kind : {"cosine", "linear"}) {
    NoiseSchedule schedule = small_schedule(kind, 40, 3, 4, rng);
    CHECK(schedule.alpha_bar(0) == 1.0);
    double prev = 1.0;
    for (int t = 1; t <= schedule.T(); ++t) {
      CHECK(schedule.beta(t) > 0.0);
      CHECK(schedule.beta(t) < 1.0);
      CHECK(schedule.alpha_bar(t) < prev);
      prev = schedule.alpha_bar(t);
    }
    CHECK(schedule.alpha_bar(schedule.T()) < 1e-3);
  }
  ScheduleConfig bad;
  bad.kind = "quadratic";
  bad.T = 10;
  RowVec m = RowVec::Constant(3, 1.0 / 3.0);
  CHECK_THROWS(NoiseSchedule(bad, m, m));
}

TEST_CASE("transition matrices are stochastic and consistent") {
  Rng rng(4);
  NoiseSchedule schedule = small_schedule("cosine", 12, 4, 3, rng);
  for (bool bonds : {false, true}) {
    const int m = bonds ? 3 : 4;
    Mat product = Mat::Identity(m, m);
    CHECK((cumulative_matrix(schedule, 0, bonds) - product).cwiseAbs().maxCoeff() == 0.0);
    for (int t = 1; t <= schedule.T(); ++t) {
      const Mat& Q = step_matrix(schedule, t, bonds);
      for (int r = 0; r < m; ++r)
        CHECK(Q.row(r).sum() == doctest::Approx(1.0).epsilon(1e-12));
      product = product * Q;
      CHECK((cumulative_matrix(schedule, t, bonds) - product).cwiseAbs().maxCoeff() <
            1e-12);
    }
  }
}

TEST_CASE("discrete posterior equals trajectory enumeration") {
  Rng rng(17);
  int cases = 0;
  double worst = 0.0;
  for (int rep = 0; rep < 8; ++rep) {
    for (int m = 2; m <= 4; ++m) {
      const int T = 2 + rng.uniform_int(4);  // 2..5
      NoiseSchedule schedule = small_schedule(
          rep % 2 == 0 ? "cosine" : "linear", T, m, m, rng);
      for (bool bonds : {false, true}) {
        const int t = 1 + rng.uniform_int(T);
        const int w = rng.uniform_int(m);
        const RowVec pred = random_simplex(rng, m);
        Mat z_t = Mat::Zero(1, m);
        z_t(0, w) = 1.0;
        Mat pred_rows = pred;
        const Mat got =
            schedule.posterior_discrete(z_t, pred_rows, t, bonds);
        const RowVec want =
            oracles::enumerate_discrete_posterior(schedule, pred, w, t, bonds);
        REQUIRE(got.rows() == 1);
        worst = std::max(worst, (got.row(0) - want).cwiseAbs().maxCoeff());
        ++cases;
      }
    }
  }
  CHECK(cases >= 48);
  CHECK(worst < 1e-10);
}

TEST_CASE("continuous posterior matches dense quadrature") {
  Rng rng(23);
  NoiseSchedule schedule = small_schedule("cosine", 30, 3, 3, rng);
  for (int rep = 0; rep < 6; ++rep) {
    const int t = 2 + rng.uniform_int(schedule.T() - 1);
    const double x0 = 2.0 * rng.normal();
    const double x_t = 2.0 * rng.normal();
    Mat P_t = Mat::Constant(1, 1, x_t);
    Mat P0 = Mat::Constant(1, 1, x0);
    const auto got = schedule.posterior_position(P_t, P0, t);
    double mean = 0.0, variance = 0.0;
    oracles::quadrature_position_posterior(schedule, x0, x_t, t, &mean,
                                           &variance);
    CHECK(got.mean(0, 0) == doctest::Approx(mean).epsilon(1e-6));
    CHECK(got.variance == doctest::Approx(variance).epsilon(1e-6));
  }
}

TEST_CASE("posterior mean interpolates prediction and observation") {
  Rng rng(29);
  NoiseSchedule schedule = small_schedule("cosine", 25, 3, 3, rng);
  const int t = 10;
  const auto coeffs = schedule.posterior_coeffs(t);
  Mat P_t = rng.normal_matrix(4, 3);
  Mat P0 = rng.normal_matrix(4, 3);
  const auto post = schedule.posterior_position(P_t, P0, t);
  const Mat expected = coeffs.mu * P0 + coeffs.nu * P_t;
  CHECK((post.mean - expected).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(post.variance == doctest::Approx(coeffs.variance));
  CHECK(coeffs.variance > 0.0);
}

TEST_CASE("forward jump has the scheduled moments") {
  Rng rng(31);
  NoiseSchedule schedule = small_schedule("cosine", 20, 3, 3, rng);
  const int t = 8;
  Mat P0 = rng.normal_matrix(2, 3);
  const int draws = 20000;
  Mat sum = Mat::Zero(2, 3), sumsq = Mat::Zero(2, 3);
  for (int d = 0; d < draws; ++d) {
    const Mat eps = rng.normal_matrix(2, 3);
    const Mat P_t = schedule.forward_position(P0, t, eps);
    sum += P_t;
    sumsq += P_t.cwiseProduct(P_t);
  }
  const Mat mean = sum / draws;
  const Mat expected_mean = std::sqrt(schedule.alpha_bar(t)) * P0;
  const Mat var = sumsq / draws - mean.cwiseProduct(mean);
  CHECK((mean - expected_mean).cwiseAbs().maxCoeff() < 0.05);
  const double expected_var = 1.0 - schedule.alpha_bar(t);
  CHECK((var.array() - expected_var).abs().maxCoeff() < 0.05 * 3);
}

TEST_CASE("terminal discrete distribution approaches the marginal") {
  Rng rng(37);
  RowVec atom_marg = random_simplex(rng, 5);
  RowVec bond_marg = random_simplex(rng, 4);
  ScheduleConfig config;
  config.T = 60;
  config.kind = "cosine";
  NoiseSchedule schedule(config, atom_marg, bond_marg);
  Mat start = Mat::Identity(5, 5);  // every starting category at once
  const Mat end = discrete_marginal(start, schedule.Qbar_atom(schedule.T()));
  for (int r = 0; r < 5; ++r) {
    const double tv = 0.5 * (end.row(r) - atom_marg).cwiseAbs().sum();
    CHECK(tv < 0.05);
  }
}

TEST_CASE("categorical sampling respects shapes and symmetry") {
  Rng rng(41);
  Mat probs(3, 4);
  for (int r = 0; r < 3; ++r) probs.row(r) = random_simplex(rng, 4);
  const Mat rows = sample_onehot_rows(probs, rng);
  for (int r = 0; r < 3; ++r) {
    CHECK(rows.row(r).sum() == doctest::Approx(1.0));
    CHECK(rows.row(r).maxCoeff() == 1.0);
  }
  const int n = 5;
  RowVec bond_probs = random_simplex(rng, kBondCategoryCount);
  Mat grid(n * n, kBondCategoryCount);
  for (int r = 0; r < n * n; ++r) grid.row(r) = bond_probs;
  const Mat bonds = sample_symmetric_onehot(grid, n, rng);
  for (int i = 0; i < n; ++i) {
    // diagonal stays in the none category
    CHECK(bonds(i * n + i, kBondNone) == 1.0);
    for (int j = 0; j < n; ++j)
      CHECK((bonds.row(i * n + j) - bonds.row(j * n + i))
                .cwiseAbs()
                .maxCoeff() == 0.0);
  }
}

TEST_CASE("out of range steps are rejected") {
  Rng rng(43);
  NoiseSchedule schedule = small_schedule("cosine", 10, 3, 3, rng);
  CHECK_THROWS(schedule.beta(0));
  CHECK_THROWS(schedule.beta(11));
  CHECK_THROWS(schedule.alpha_bar(-1));
  CHECK_THROWS(schedule.Q_atom(0));
  CHECK_NOTHROW(schedule.Qbar_atom(0));
}

}  // TEST_SUITE
