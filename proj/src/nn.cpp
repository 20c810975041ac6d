//
// Project promptmol - Copyright 2026 the promptmol authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "pmol/nn.hpp"

#include <cmath>

namespace pmol::nn {

Mat& ParamStore::create(const std::string& name, int rows, int cols) {
  auto [it, inserted] = params_.emplace(name, Mat::Zero(rows, cols));
  if (!inserted) fail_config("parameter ", name, " already exists");
  return it->second;
}

Mat& ParamStore::at(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) fail_config("unknown parameter ", name);
  return it->second;
}

const Mat& ParamStore::at(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) fail_config("unknown parameter ", name);
  return it->second;
}

bool ParamStore::contains(const std::string& name) const {
  return params_.count(name) > 0;
}

ad::Var TapeBinding::operator()(const std::string& name) {
  auto it = bound_.find(name);
  if (it != bound_.end()) return it->second;
  ad::Var v = tape_.input(params_.at(name), true);
  bound_.emplace(name, v);
  return v;
}

void TapeBinding::accumulate_grads(GradMap& grads) const {
  // A bound parameter the output never touched has gradient zero (the
  // alignment trunk, for one, ignores the last position update).
  for (const auto& [name, var] : bound_) {
    auto it = grads.find(name);
    if (it == grads.end()) {
      grads.emplace(name, tape_.grad_or_zero(var));
    } else {
      it->second += tape_.grad_or_zero(var);
    }
  }
}

void xavier_init(Mat& w, Rng& rng) {
  const double limit = std::sqrt(6.0 / (w.rows() + w.cols()));
  for (int i = 0; i < w.rows(); ++i)
    for (int j = 0; j < w.cols(); ++j)
      w(i, j) = (2.0 * rng.uniform() - 1.0) * limit;
}

void init_mlp(ParamStore& params, const std::string& prefix,
              const std::vector<int>& widths, Rng& rng) {
  if (widths.size() < 2) fail_config("mlp ", prefix, " needs at least two widths");
  for (std::size_t k = 0; k + 1 < widths.size(); ++k) {
    Mat& w = params.create(prefix + ".w" + std::to_string(k), widths[k],
                           widths[k + 1]);
    xavier_init(w, rng);
    params.create(prefix + ".b" + std::to_string(k), 1, widths[k + 1]);
  }
}

ad::Var apply_mlp(TapeBinding& p, const std::string& prefix, ad::Var x) {
  ad::Tape& t = p.tape();
  for (int k = 0;; ++k) {
    const std::string wname = prefix + ".w" + std::to_string(k);
    if (!p.params().contains(wname)) {
      if (k == 0) fail_config("mlp ", prefix, " has no parameters");
      return x;
    }
    if (k > 0) x = t.silu(x);
    x = t.add_rowvec(t.matmul(x, p(wname)), p(prefix + ".b" + std::to_string(k)));
  }
}

void init_layer_norm(ParamStore& params, const std::string& prefix, int width) {
  params.create(prefix + ".gain", 1, width).setOnes();
  params.create(prefix + ".bias", 1, width);
}

ad::Var apply_layer_norm(TapeBinding& p, const std::string& prefix, ad::Var x) {
  ad::Tape& t = p.tape();
  return t.add_rowvec(t.mul_rowvec(t.layer_norm_rows(x), p(prefix + ".gain")),
                      p(prefix + ".bias"));
}

void Adam::update(ParamStore& params, const GradMap& grads) {
  ++step_;
  const double bc1 = 1.0 - std::pow(config_.beta1, step_);
  const double bc2 = 1.0 - std::pow(config_.beta2, step_);
  for (const auto& [name, g] : grads) {
    Mat& w = params.at(name);
    if (g.rows() != w.rows() || g.cols() != w.cols())
      fail_config("gradient shape mismatch for ", name);
    Mat& m = m_.try_emplace(name, Mat::Zero(w.rows(), w.cols())).first->second;
    Mat& v = v_.try_emplace(name, Mat::Zero(w.rows(), w.cols())).first->second;
    m = config_.beta1 * m + (1.0 - config_.beta1) * g;
    v = config_.beta2 * v + (1.0 - config_.beta2) * g.cwiseProduct(g);
    const Mat mhat = m / bc1;
    const Mat vhat = v / bc2;
    w.array() -=
        config_.lr * mhat.array() / (vhat.array().sqrt() + config_.eps);
  }
}

RowVec sinusoidal_embedding(int t, int width) {
  if (width < 2 || width % 2 != 0)
    fail_config("sinusoidal embedding width must be even, got ", width);
  const int half = width / 2;
  RowVec out(width);
  for (int k = 0; k < half; ++k) {
    const double freq = std::pow(10000.0, -static_cast<double>(k) / half);
    out[k] = std::sin(t * freq);
    out[half + k] = std::cos(t * freq);
  }
  return out;
}

}  // namespace pmol::nn
