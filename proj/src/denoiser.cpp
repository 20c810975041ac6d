//
// Project promptmol - Copyright 2026 the promptmol authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "pmol/denoiser.hpp"

#include <cmath>
#include <string>
#include <utility>
#include <vector>

namespace pmol {
namespace {

constexpr double kRmsEps = 1e-12;

std::vector<int> pair_sources(int n) {
  std::vector<int> idx(static_cast<std::size_t>(n) * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) idx[edge_index(i, j, n)] = i;
  return idx;
}

std::vector<int> pair_targets(int n) {
  std::vector<int> idx(static_cast<std::size_t>(n) * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) idx[edge_index(i, j, n)] = j;
  return idx;
}

Mat axis_rows(int rows, int axis) {
  Mat m = Mat::Zero(rows, 3);
  m.col(axis).setOnes();
  return m;
}

struct TapeFrames {
  ad::Var f1, f2, f3;
  Vec pos_mask;  // 0 on degenerate pairs, 1 elsewhere
};

TapeFrames frames_on_tape(ad::Tape& t, ad::Var P, const std::vector<int>& src,
                          const std::vector<int>& dst) {
  const int m = static_cast<int>(src.size());
  auto pi = t.gather_rows(P, src);
  auto pj = t.gather_rows(P, dst);
  std::vector<char> bad_diff, bad_cross;
  auto f1 = t.normalize_rows_guarded(t.sub(pi, pj), kFrameEps,
                                     axis_rows(m, 0), &bad_diff);
  auto f2 = t.normalize_rows_guarded(t.rowcross(pi, pj), kFrameEps,
                                     axis_rows(m, 1), &bad_cross);
  auto f3 = t.rowcross(f1, f2);
  Vec mask(m);
  for (int e = 0; e < m; ++e)
    mask(e) = (bad_diff[e] || bad_cross[e]) ? 0.0 : 1.0;
  return {f1, f2, f3, std::move(mask)};
}

struct RmsNorm {
  ad::Var normalized;
  ad::Var rms;  // 1 x 1
};

// Rescales rows to unit root-mean-square norm times a learned gain.
RmsNorm rms_rescale(ad::Tape& t, ad::Var P, ad::Var gain) {
  const double inv_n = 1.0 / static_cast<double>(P.rows());
  auto mean_sq = t.scale(t.sum(t.mul(P, P)), inv_n);
  auto rinv = t.inv_sqrt_eps(mean_sq, kRmsEps);
  auto rms = t.mul(t.add_scalar(mean_sq, kRmsEps), rinv);
  auto out = t.mul_scalar_node(P, t.mul(gain, rinv));
  return {out, rms};
}

ad::Var pair_scalar_coords(ad::Tape& t, ad::Var points,
                           const TapeFrames& f) {
  return t.concat_cols({t.rowdot(points, f.f1), t.rowdot(points, f.f2),
                        t.rowdot(points, f.f3)});
}

std::string layer_prefix(int l) { return "layer" + std::to_string(l); }

void check_core_inputs(const CoreWidths& w, const ad::Var& H, const ad::Var& E,
                       const ad::Var& P) {
  const int n = H.rows();
  if (n < 1) fail_runtime("denoiser input has no atoms");
  if (H.cols() != w.atom_width)
    fail_runtime("denoiser atom features are ", H.cols(), " wide, expected ",
                 w.atom_width);
  if (E.rows() != n * n || E.cols() != w.bond_width)
    fail_runtime("denoiser bond features are ", E.rows(), "x", E.cols(),
                 ", expected ", n * n, "x", w.bond_width);
  if (P.rows() != n || P.cols() != 3)
    fail_runtime("denoiser positions are ", P.rows(), "x", P.cols(),
                 ", expected ", n, "x3");
}

}  // namespace

void CoreWidths::check() const {
  if (layers < 1) fail_config("denoiser needs at least one layer");
  if (d_node < 2 || d_node % 2 != 0)
    fail_config("node width must be even and at least 2, got ", d_node);
  if (d_edge < 1) fail_config("edge width must be positive, got ", d_edge);
  if (d_pos < 1) fail_config("geometry width must be positive, got ", d_pos);
  if (atom_width < 2) fail_config("atom vocabulary too small: ", atom_width);
  if (bond_width < 2) fail_config("bond vocabulary too small: ", bond_width);
}

EdgeFrames build_edge_frames(const Mat& positions) {
  if (positions.cols() != 3)
    fail_runtime("positions must be n x 3, got cols ", positions.cols());
  const int n = static_cast<int>(positions.rows());
  if (n < 1) fail_runtime("positions are empty");
  const int m = n * n;
  EdgeFrames out;
  out.f1.resize(m, 3);
  out.f2.resize(m, 3);
  out.f3.resize(m, 3);
  out.degenerate.assign(m, 0);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const int e = edge_index(i, j, n);
      const Vec3 pi = positions.row(i);
      const Vec3 pj = positions.row(j);
      const Vec3 diff = pi - pj;
      const Vec3 cross = pi.cross(pj);
      bool bad = false;
      Vec3 f1 = Vec3::UnitX();
      if (diff.norm() >= kFrameEps) {
        f1 = diff / diff.norm();
      } else {
        bad = true;
      }
      Vec3 f2 = Vec3::UnitY();
      if (cross.norm() >= kFrameEps) {
        f2 = cross / cross.norm();
      } else {
        bad = true;
      }
      out.f1.row(e) = f1;
      out.f2.row(e) = f2;
      out.f3.row(e) = f1.cross(f2);
      out.degenerate[e] = bad ? 1 : 0;
    }
  }
  return out;
}

Vec3 scalarize(const Vec3& v, const Vec3& f1, const Vec3& f2, const Vec3& f3) {
  return Vec3(v.dot(f1), v.dot(f2), v.dot(f3));
}

Vec3 tensorize(const Vec3& a, const Vec3& f1, const Vec3& f2, const Vec3& f3) {
  return a(0) * f1 + a(1) * f2 + a(2) * f3;
}

void init_core_params(nn::ParamStore& params, const CoreWidths& w, Rng& rng) {
  w.check();
  nn::init_mlp(params, "embed.atom", {w.atom_width, w.d_node}, rng);
  nn::init_mlp(params, "embed.bond", {w.bond_width, w.d_edge}, rng);
  if (w.time_embedding)
    nn::init_mlp(params, "time", {w.d_node, w.d_node, w.d_node}, rng);
  params.create("embed.pos.gain", 1, 1).setOnes();
  for (int l = 0; l < w.layers; ++l) {
    const std::string pre = layer_prefix(l);
    for (const char* head : {".q.w", ".k.w", ".v.w"}) {
      Mat& m = params.create(pre + head, w.d_node, w.d_node);
      nn::xavier_init(m, rng);
    }
    nn::init_mlp(params, pre + ".att", {6 + w.d_edge, w.d_pos, w.d_node}, rng);
    nn::init_mlp(params, pre + ".node", {w.d_node, w.d_node, w.d_node}, rng);
    nn::init_mlp(params, pre + ".edge", {2 * w.d_node, w.d_pos, w.d_edge},
                 rng);
    nn::init_mlp(params, pre + ".pos", {w.d_node, w.d_pos, 3}, rng);
    nn::init_layer_norm(params, pre + ".node_norm", w.d_node);
    nn::init_layer_norm(params, pre + ".edge_norm", w.d_edge);
    params.create(pre + ".pos.gain", 1, 1).setOnes();
  }
}

CoreOutput build_core(nn::TapeBinding& p, const CoreWidths& w, ad::Var H,
                      ad::Var E, ad::Var P, int t) {
  check_core_inputs(w, H, E, P);
  ad::Tape& tape = p.tape();
  const int n = H.rows();
  const auto src = pair_sources(n);
  const auto dst = pair_targets(n);
  const double att_scale = 1.0 / std::sqrt(static_cast<double>(w.d_node));

  ad::Var A = nn::apply_mlp(p, "embed.atom", H);
  if (w.time_embedding) {
    if (t < 0) fail_runtime("denoiser step index must be non-negative");
    auto temb = tape.constant(nn::sinusoidal_embedding(t, w.d_node));
    A = tape.add_rowvec(A, nn::apply_mlp(p, "time", temb));
  }
  ad::Var W = nn::apply_mlp(p, "embed.bond", E);
  auto scaled = rms_rescale(tape, P, p("embed.pos.gain"));
  ad::Var X = scaled.normalized;

  for (int l = 0; l < w.layers; ++l) {
    const std::string pre = layer_prefix(l);
    TapeFrames frames = frames_on_tape(tape, X, src, dst);
    auto xi = tape.gather_rows(X, src);
    auto xj = tape.gather_rows(X, dst);
    auto geometry = tape.concat_cols({pair_scalar_coords(tape, xi, frames),
                                      pair_scalar_coords(tape, xj, frames),
                                      W});
    auto bias = nn::apply_mlp(p, pre + ".att", geometry);

    auto q = tape.gather_rows(tape.matmul(A, p(pre + ".q.w")), src);
    auto k = tape.gather_rows(tape.matmul(A, p(pre + ".k.w")), dst);
    auto v = tape.gather_rows(tape.matmul(A, p(pre + ".v.w")), dst);
    auto logits = tape.add(tape.scale(tape.mul(q, k), att_scale), bias);
    auto alpha = tape.softmax_block_rows(logits, n);
    auto dx = tape.sum_block_rows(tape.mul(alpha, v), n);

    A = nn::apply_layer_norm(p, pre + ".node_norm",
                             tape.add(A, nn::apply_mlp(p, pre + ".node", dx)));
    auto dx_pair = tape.concat_cols(
        {tape.gather_rows(dx, src), tape.gather_rows(dx, dst)});
    W = nn::apply_layer_norm(
        p, pre + ".edge_norm",
        tape.add(W, nn::apply_mlp(p, pre + ".edge", dx_pair)));

    auto coeff = nn::apply_mlp(p, pre + ".pos", alpha);
    auto step = tape.add(
        tape.add(tape.mul_colvec(frames.f1, tape.slice_cols(coeff, 0, 1)),
                 tape.mul_colvec(frames.f2, tape.slice_cols(coeff, 1, 1))),
        tape.mul_colvec(frames.f3, tape.slice_cols(coeff, 2, 1)));
    auto dp = tape.sum_block_rows(tape.mask_rows(step, frames.pos_mask), n);
    X = rms_rescale(tape, tape.add(X, dp), p(pre + ".pos.gain")).normalized;

    if (!tape.value(A).allFinite() || !tape.value(W).allFinite() ||
        !tape.value(X).allFinite())
      fail_runtime("denoiser layer ", l, " produced non-finite activations");
  }
  return {A, W, X, scaled.rms};
}

DenoiserModel::DenoiserModel(const DenoiserConfig& config, Rng& rng)
    : config_(config) {
  config_.widths.check();
  if (config_.T < 2) fail_config("diffusion step count must be >= 2");
  init_core_params(params_, config_.widths, rng);
  nn::init_mlp(params_, "head.atom",
               {config_.widths.d_node, config_.widths.atom_width}, rng);
  nn::init_mlp(params_, "head.bond",
               {config_.widths.d_edge, config_.widths.bond_width}, rng);
  params_.create("head.pos.scale", 1, 1).setOnes();
}

DenoiserModel::DenoiserModel(const DenoiserConfig& config,
                             nn::ParamStore params)
    : config_(config), params_(std::move(params)) {
  config_.widths.check();
  if (config_.T < 2) fail_config("diffusion step count must be >= 2");
  for (const char* name : {"embed.atom.w0", "head.atom.w0", "head.bond.w0",
                           "head.pos.scale", "embed.pos.gain"})
    if (!params_.contains(name))
      fail_runtime("checkpoint is missing parameter ", name);
}

DenoiserModel::GraphOutput DenoiserModel::build_graph(nn::TapeBinding& p,
                                                      ad::Var H, ad::Var E,
                                                      ad::Var P, int t) const {
  if (t < 1 || t > config_.T)
    fail_runtime("step index ", t, " outside [1, ", config_.T, "]");
  ad::Tape& tape = p.tape();
  CoreOutput core = build_core(p, config_.widths, H, E, P, t);
  const int n = H.rows();
  GraphOutput out;
  out.atom_logits = nn::apply_mlp(p, "head.atom", core.nodes);
  out.bond_logits =
      tape.symmetrize_pairs(nn::apply_mlp(p, "head.bond", core.edges), n);
  auto restore = tape.mul(p("head.pos.scale"), core.input_rms);
  out.pred_P0 =
      tape.project_zero_mean(tape.mul_scalar_node(core.positions, restore));
  return out;
}

DenoiserOutput DenoiserModel::forward(const DenseState& state, int t) const {
  check_state_shapes(state, config_.widths.atom_width,
                     config_.widths.bond_width);
  ad::Tape tape;
  nn::TapeBinding binding(tape, params_);
  auto H = tape.constant(state.H);
  auto E = tape.constant(state.E);
  auto P = tape.constant(state.P);
  GraphOutput g = build_graph(binding, H, E, P, t);
  DenoiserOutput out;
  out.pred_P0 = tape.value(g.pred_P0);
  out.atom_logits = tape.value(g.atom_logits);
  out.bond_logits = tape.value(g.bond_logits);
  return out;
}

Mat softmax_rows(const Mat& logits) {
  Mat out(logits.rows(), logits.cols());
  for (int r = 0; r < logits.rows(); ++r) {
    RowVec row = logits.row(r);
    const double m = row.maxCoeff();
    RowVec e = (row.array() - m).exp();
    out.row(r) = e / e.sum();
  }
  return out;
}

Mat DenoiserOutput::atom_probs() const { return softmax_rows(atom_logits); }
Mat DenoiserOutput::bond_probs() const { return softmax_rows(bond_logits); }

}  // namespace pmol
