//
// Project promptmol - Copyright 2026 the promptmol authors.
// SPDX-License-Identifier: Apache-2.0
//

#ifndef PMOL_NN_HPP
#define PMOL_NN_HPP

#include <map>
#include <string>
#include <vector>

#include "pmol/autodiff.hpp"
#include "pmol/rng.hpp"

namespace pmol::nn {

using GradMap = std::map<std::string, Mat>;

// Named dense parameters.  Map order is the canonical parameter order for
// checkpoints and optimizer state.
class ParamStore {
 public:
  Mat& create(const std::string& name, int rows, int cols);
  Mat& at(const std::string& name);
  const Mat& at(const std::string& name) const;
  bool contains(const std::string& name) const;
  std::size_t count() const { return params_.size(); }
  const std::map<std::string, Mat>& all() const { return params_; }
  std::map<std::string, Mat>& all_mutable() { return params_; }

 private:
  std::map<std::string, Mat> params_;
};

// Binds parameters as differentiable leaves of one tape, at most once each,
// and collects their gradients after backward.
class TapeBinding {
 public:
  TapeBinding(ad::Tape& tape, const ParamStore& params)
      : tape_(tape), params_(params) {}

  ad::Var operator()(const std::string& name);
  ad::Tape& tape() { return tape_; }
  const ParamStore& params() const { return params_; }

  // Adds each bound parameter's gradient into grads (missing keys created).
  void accumulate_grads(GradMap& grads) const;

 private:
  ad::Tape& tape_;
  const ParamStore& params_;
  std::map<std::string, ad::Var> bound_;
};

void xavier_init(Mat& w, Rng& rng);

// Creates weights/biases named "<prefix>.w0", "<prefix>.b0", ... for a
// dense stack with the given widths (silu between layers, linear output).
void init_mlp(ParamStore& params, const std::string& prefix,
              const std::vector<int>& widths, Rng& rng);
ad::Var apply_mlp(TapeBinding& p, const std::string& prefix, ad::Var x);

// Row-wise layer norm with learned gain/bias ("<prefix>.gain/.bias").
void init_layer_norm(ParamStore& params, const std::string& prefix, int width);
ad::Var apply_layer_norm(TapeBinding& p, const std::string& prefix, ad::Var x);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  explicit Adam(AdamConfig config) : config_(config) {}
  void update(ParamStore& params, const GradMap& grads);
  int steps() const { return step_; }

 private:
  AdamConfig config_;
  int step_ = 0;
  GradMap m_, v_;
};

// Sinusoidal features of an integer step, laid out [sin..., cos...].
RowVec sinusoidal_embedding(int t, int width);

}  // namespace pmol::nn

#endif  // PMOL_NN_HPP
