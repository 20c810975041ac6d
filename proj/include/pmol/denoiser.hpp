//
// Project promptmol - Copyright 2026 the promptmol authors.
// SPDX-License-Identifier: Apache-2.0
//

#ifndef PMOL_DENOISER_HPP
#define PMOL_DENOISER_HPP

#include "pmol/nn.hpp"
#include "pmol/state.hpp"

namespace pmol {

// Orthonormal frame per ordered atom pair, built from raw coordinates:
//   f1 = (p_i - p_j)/|p_i - p_j|,  f2 = (p_i x p_j)/|p_i x p_j|,  f3 = f1 x f2.
// f2 flips sign under reflection, which lets invariant features separate
// mirror images.  Positions are expected in a centered gauge: f2 depends on
// the origin, so callers fix the gauge (center of geometry for free runs,
// the fixed-context coordinates for constrained edits).
struct EdgeFrames {
  Mat f1, f2, f3;                // (n*n) x 3, row i*n+j
  std::vector<char> degenerate;  // coincident or collinear pairs
};

inline constexpr double kFrameEps = 1e-6;

EdgeFrames build_edge_frames(const Mat& positions);

// Coordinates of v in a frame and back: S(v) = (v.f1, v.f2, v.f3),
// T(a) = a1 f1 + a2 f2 + a3 f3.
Vec3 scalarize(const Vec3& v, const Vec3& f1, const Vec3& f2, const Vec3& f3);
Vec3 tensorize(const Vec3& a, const Vec3& f1, const Vec3& f2, const Vec3& f3);

struct CoreWidths {
  int layers = 5;
  int d_node = 256;
  int d_edge = 128;
  int d_pos = 64;  // hidden width of the geometry heads
  int atom_width = 9;
  int bond_width = 5;
  bool time_embedding = true;
  void check() const;
};

// Attention trunk shared by the denoiser and the molecule encoder: node,
// edge and position streams with frame-scalarized geometry in the attention
// logits and frame-tensorized position updates.  Scalar streams end each
// layer with layer norm; the position stream is rescaled to unit RMS with a
// learned gain (so a zero-weight network is the identity on positions up to
// the input scale, which the caller restores via `input_rms`).
struct CoreOutput {
  ad::Var nodes;      // n x d_node
  ad::Var edges;      // (n*n) x d_edge
  ad::Var positions;  // n x 3, unit RMS gauge
  ad::Var input_rms;  // 1 x 1
};

void init_core_params(nn::ParamStore& params, const CoreWidths& w, Rng& rng);
CoreOutput build_core(nn::TapeBinding& p, const CoreWidths& w, ad::Var H,
                      ad::Var E, ad::Var P, int t);

struct DenoiserConfig {
  CoreWidths widths;
  int T = 800;  // diffusion steps the model is conditioned on
};

struct DenoiserOutput {
  Mat pred_P0;      // n x 3, zero center of geometry
  Mat atom_logits;  // n x atom_width
  Mat bond_logits;  // (n*n) x bond_width, symmetric
  Mat atom_probs() const;
  Mat bond_probs() const;
};

class DenoiserModel {
 public:
  DenoiserModel(const DenoiserConfig& config, Rng& rng);
  DenoiserModel(const DenoiserConfig& config, nn::ParamStore params);

  const DenoiserConfig& config() const { return config_; }
  const nn::ParamStore& params() const { return params_; }
  nn::ParamStore& params() { return params_; }

  struct GraphOutput {
    ad::Var pred_P0;
    ad::Var atom_logits;
    ad::Var bond_logits;
  };
  // Differentiable forward; callers own the tape (and may mark H/E/P as
  // gradient roots).  t must lie in [1, T].
  GraphOutput build_graph(nn::TapeBinding& p, ad::Var H, ad::Var E, ad::Var P,
                          int t) const;

  DenoiserOutput forward(const DenseState& state, int t) const;

 private:
  DenoiserConfig config_;
  nn::ParamStore params_;
};

Mat softmax_rows(const Mat& logits);

}  // namespace pmol

#endif  // PMOL_DENOISER_HPP
