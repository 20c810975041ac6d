//
// Project promptmol - Copyright 2026 the promptmol authors.
// SPDX-License-Identifier: Apache-2.0
//

#ifndef PMOL_SCHEDULE_HPP
#define PMOL_SCHEDULE_HPP

#include <string>
#include <vector>

#include "pmol/common.hpp"
#include "pmol/rng.hpp"

namespace pmol {

struct ScheduleConfig {
  int T = 800;
  std::string kind = "cosine";  // "cosine" or "linear"
};

// Variance schedule shared by the Gaussian chain on positions and the
// categorical chains on atom and bond types.  The categorical per-step
// kernel is Q_t = (1 - beta_t) I + beta_t 1 m with the same clock as the
// Gaussian chain, so cumulative products satisfy
// Qbar_t = alpha_bar_t I + (1 - alpha_bar_t) 1 m.
class NoiseSchedule {
 public:
  NoiseSchedule(const ScheduleConfig& config, RowVec atom_marginal,
                RowVec bond_marginal);

  int T() const { return config_.T; }
  const std::string& kind() const { return config_.kind; }
  double beta(int t) const;       // t in [1, T]
  double alpha_bar(int t) const;  // t in [0, T], alpha_bar(0) = 1
  const RowVec& atom_marginal() const { return m_atom_; }
  const RowVec& bond_marginal() const { return m_bond_; }
  const Mat& Q_atom(int t) const;     // t in [1, T]
  const Mat& Q_bond(int t) const;
  const Mat& Qbar_atom(int t) const;  // t in [0, T]; t = 0 is the identity
  const Mat& Qbar_bond(int t) const;

  // Closed-form jump: sqrt(alpha_bar_t) P0 + sqrt(1 - alpha_bar_t) eps.
  Mat forward_position(const Mat& P0, int t, const Mat& eps) const;

  struct PosteriorCoeffs {
    double mu = 0.0;        // weight on the predicted clean positions
    double nu = 0.0;        // weight on the current noised positions
    double variance = 0.0;  // per-coordinate posterior variance
  };
  PosteriorCoeffs posterior_coeffs(int t) const;

  struct GaussianPosterior {
    Mat mean;
    double variance = 0.0;
  };
  GaussianPosterior posterior_position(const Mat& P_t, const Mat& pred_P0,
                                       int t) const;

  // Per-row probabilities of z_{t-1} given one-hot z_t rows and predicted
  // clean-category probabilities: row proportional to
  // (z_t Q_t^T) hadamard (pred Qbar_{t-1}), normalized.
  Mat posterior_discrete(const Mat& z_t_onehot, const Mat& pred_z0_probs,
                         int t, bool bonds) const;

 private:
  const Mat& Q(int t, bool bonds) const;
  const Mat& Qbar(int t, bool bonds) const;
  void check_t_step(int t) const;

  ScheduleConfig config_;
  RowVec m_atom_, m_bond_;
  std::vector<double> beta_;       // index 0 unused
  std::vector<double> alpha_bar_;  // index 0 .. T
  std::vector<Mat> Q_atom_, Q_bond_;
  std::vector<Mat> Qbar_atom_, Qbar_bond_;
};

// Multiply one-hot (or simplex) rows by a transition matrix: rows of z Q.
Mat discrete_marginal(const Mat& z_rows, const Mat& Q);

// Sample one-hot rows from per-row probabilities.
Mat sample_onehot_rows(const Mat& probs, Rng& rng);

// Sample a symmetric (n*n) x b one-hot bond layout from per-row
// probabilities: rows with i < j are drawn in row-major order and mirrored,
// the diagonal is forced to the "none" category.
Mat sample_symmetric_onehot(const Mat& probs, int n, Rng& rng);

}  // namespace pmol

#endif  // PMOL_SCHEDULE_HPP
