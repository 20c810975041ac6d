//
// Project promptmol - Copyright 2026 the promptmol authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "pmol/schedule.hpp"

#include <cmath>

#include "pmol/molecule.hpp"
#include "pmol/state.hpp"

namespace pmol {

namespace {

void check_marginal(const RowVec& m, const char* which) {
  if (m.size() < 2) fail_config(which, " marginal needs at least two categories");
  if (!m.allFinite() || m.minCoeff() < 0.0)
    fail_config(which, " marginal must be non-negative and finite");
  if (std::abs(m.sum() - 1.0) > 1e-9)
    fail_config(which, " marginal must sum to 1, got ", m.sum());
}

std::vector<double> make_betas(const ScheduleConfig& config) {
  const int T = config.T;
  std::vector<double> beta(T + 1, 0.0);
  if (config.kind == "cosine") {
    const double s = 0.008;
    auto f = [&](double t) {
      const double x = (t / T + s) / (1.0 + s) * M_PI / 2.0;
      const double c = std::cos(x);
      return c * c;
    };
    double prev = 1.0;
    for (int t = 1; t <= T; ++t) {
      const double cur = f(t) / f(0);
      beta[t] = std::clamp(1.0 - cur / prev, 1e-8, 0.999);
      prev = cur;
    }
  } else if (config.kind == "linear") {
    // Classic 1e-4..2e-2 endpoints defined at 1000 steps, rescaled so the
    // total noise budget does not depend on T.
    const double scale = 1000.0 / T;
    const double lo = scale * 1e-4;
    const double hi = scale * 2e-2;
    for (int t = 1; t <= T; ++t) {
      const double frac = T == 1 ? 1.0 : static_cast<double>(t - 1) / (T - 1);
      beta[t] = std::clamp(lo + frac * (hi - lo), 1e-8, 0.999);
    }
  } else {
    fail_config("unknown schedule kind '", config.kind, "'");
  }
  return beta;
}

}  // namespace

NoiseSchedule::NoiseSchedule(const ScheduleConfig& config, RowVec atom_marginal,
                             RowVec bond_marginal)
    : config_(config),
      m_atom_(std::move(atom_marginal)),
      m_bond_(std::move(bond_marginal)) {
  if (config_.T < 2) fail_config("schedule requires T >= 2, got ", config_.T);
  check_marginal(m_atom_, "atom");
  check_marginal(m_bond_, "bond");

  beta_ = make_betas(config_);
  alpha_bar_.assign(config_.T + 1, 1.0);
  for (int t = 1; t <= config_.T; ++t)
    alpha_bar_[t] = alpha_bar_[t - 1] * (1.0 - beta_[t]);
  if (!(alpha_bar_[config_.T] < 1e-3))
    fail_config("schedule does not reach the noise terminal: alpha_bar_T = ",
                alpha_bar_[config_.T]);

  auto build = [&](const RowVec& m, std::vector<Mat>& Q, std::vector<Mat>& Qbar) {
    const int k = static_cast<int>(m.size());
    const Mat stationary = Mat::Ones(k, 1) * m;  // every row is m
    Q.assign(config_.T + 1, Mat());
    Qbar.assign(config_.T + 1, Mat());
    Qbar[0] = Mat::Identity(k, k);
    for (int t = 1; t <= config_.T; ++t) {
      Q[t] = (1.0 - beta_[t]) * Mat::Identity(k, k) + beta_[t] * stationary;
      Qbar[t] = Qbar[t - 1] * Q[t];
    }
  };
  build(m_atom_, Q_atom_, Qbar_atom_);
  build(m_bond_, Q_bond_, Qbar_bond_);
}

void NoiseSchedule::check_t_step(int t) const {
  if (t < 1 || t > config_.T)
    fail_config("step t = ", t, " outside [1, ", config_.T, "]");
}

double NoiseSchedule::beta(int t) const {
  check_t_step(t);
  return beta_[t];
}

double NoiseSchedule::alpha_bar(int t) const {
  if (t < 0 || t > config_.T)
    fail_config("step t = ", t, " outside [0, ", config_.T, "]");
  return alpha_bar_[t];
}

const Mat& NoiseSchedule::Q(int t, bool bonds) const {
  check_t_step(t);
  return bonds ? Q_bond_[t] : Q_atom_[t];
}

const Mat& NoiseSchedule::Qbar(int t, bool bonds) const {
  if (t < 0 || t > config_.T)
    fail_config("step t = ", t, " outside [0, ", config_.T, "]");
  return bonds ? Qbar_bond_[t] : Qbar_atom_[t];
}

const Mat& NoiseSchedule::Q_atom(int t) const { return Q(t, false); }
const Mat& NoiseSchedule::Q_bond(int t) const { return Q(t, true); }
const Mat& NoiseSchedule::Qbar_atom(int t) const { return Qbar(t, false); }
const Mat& NoiseSchedule::Qbar_bond(int t) const { return Qbar(t, true); }

Mat NoiseSchedule::forward_position(const Mat& P0, int t, const Mat& eps) const {
  check_t_step(t);
  if (eps.rows() != P0.rows() || eps.cols() != P0.cols())
    fail_config("noise shape must match positions");
  const double ab = alpha_bar_[t];
  return std::sqrt(ab) * P0 + std::sqrt(1.0 - ab) * eps;
}

NoiseSchedule::PosteriorCoeffs NoiseSchedule::posterior_coeffs(int t) const {
  check_t_step(t);
  const double ab_t = alpha_bar_[t];
  const double ab_prev = alpha_bar_[t - 1];
  const double b = beta_[t];
  PosteriorCoeffs c;
  c.mu = std::sqrt(ab_prev) * b / (1.0 - ab_t);
  c.nu = std::sqrt(1.0 - b) * (1.0 - ab_prev) / (1.0 - ab_t);
  c.variance = b * (1.0 - ab_prev) / (1.0 - ab_t);
  return c;
}

NoiseSchedule::GaussianPosterior NoiseSchedule::posterior_position(
    const Mat& P_t, const Mat& pred_P0, int t) const {
  if (P_t.rows() != pred_P0.rows() || P_t.cols() != pred_P0.cols())
    fail_config("posterior_position shapes differ");
  const PosteriorCoeffs c = posterior_coeffs(t);
  GaussianPosterior post;
  post.mean = c.mu * pred_P0 + c.nu * P_t;
  post.variance = c.variance;
  return post;
}

Mat NoiseSchedule::posterior_discrete(const Mat& z_t_onehot,
                                      const Mat& pred_z0_probs, int t,
                                      bool bonds) const {
  check_t_step(t);
  const Mat& Qt = Q(t, bonds);
  const Mat& Qbar_prev = Qbar(t - 1, bonds);
  if (z_t_onehot.cols() != Qt.rows() || pred_z0_probs.cols() != Qt.rows() ||
      z_t_onehot.rows() != pred_z0_probs.rows())
    fail_config("posterior_discrete shape mismatch");

  // row = (z_t Q_t^T) hadamard (pred Qbar_{t-1}), renormalized
  Mat out = (z_t_onehot * Qt.transpose()).cwiseProduct(pred_z0_probs * Qbar_prev);
  for (int r = 0; r < out.rows(); ++r) {
    const double norm = out.row(r).sum();
    if (!(norm > 0.0) || !out.row(r).allFinite())
      fail_runtime("discrete posterior row ", r, " has zero mass at t = ", t);
    out.row(r) /= norm;
  }
  return out;
}

Mat discrete_marginal(const Mat& z_rows, const Mat& Q) {
  if (z_rows.cols() != Q.rows())
    fail_config("discrete_marginal width ", z_rows.cols(), " does not match Q");
  return z_rows * Q;
}

Mat sample_onehot_rows(const Mat& probs, Rng& rng) {
  Mat out = Mat::Zero(probs.rows(), probs.cols());
  for (int r = 0; r < probs.rows(); ++r)
    out(r, rng.categorical(probs.row(r))) = 1.0;
  return out;
}

Mat sample_symmetric_onehot(const Mat& probs, int n, Rng& rng) {
  if (probs.rows() != static_cast<long>(n) * n)
    fail_config("symmetric sampling expects ", n * n, " rows, got ",
                probs.rows());
  Mat out = Mat::Zero(probs.rows(), probs.cols());
  for (int i = 0; i < n; ++i) {
    out(edge_index(i, i, n), kBondNone) = 1.0;
    for (int j = i + 1; j < n; ++j) {
      const int cat = rng.categorical(probs.row(edge_index(i, j, n)));
      out(edge_index(i, j, n), cat) = 1.0;
      out(edge_index(j, i, n), cat) = 1.0;
    }
  }
  return out;
}

}  // namespace pmol
