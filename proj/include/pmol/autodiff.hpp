//
// Project promptmol - Copyright 2026 the promptmol authors.
// SPDX-License-Identifier: Apache-2.0
//

#ifndef PMOL_AUTODIFF_HPP
#define PMOL_AUTODIFF_HPP

#include <functional>
#include <vector>

#include "pmol/common.hpp"

namespace pmol::ad {

class Tape;

// Handle into a tape node; cheap to copy, valid for the tape's lifetime.
struct Var {
  int id = -1;
  Tape* tape = nullptr;
  bool valid() const { return id >= 0; }
  const Mat& value() const;
  int rows() const { return static_cast<int>(value().rows()); }
  int cols() const { return static_cast<int>(value().cols()); }
};

// Dynamic reverse-mode tape over dense matrices.  Nodes only reference
// earlier nodes, so reverse id order is a topological order for backward.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var input(Mat value, bool requires_grad);
  Var constant(Mat value) { return input(std::move(value), false); }

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);  // elementwise, same shape
  Var matmul(Var a, Var b);
  Var scale(Var a, double s);
  Var add_scalar(Var a, double s);
  Var transpose(Var a);

  Var add_rowvec(Var a, Var row);        // broadcast 1 x c down the rows
  Var mul_rowvec(Var a, Var row);
  Var mul_colvec(Var a, Var col);        // broadcast r x 1 across columns
  Var mul_scalar_node(Var a, Var s);     // broadcast 1 x 1 everywhere

  Var silu(Var a);
  Var tanh_(Var a);
  Var exp_(Var a);
  Var log_(Var a);                        // requires strictly positive input
  Var inv_sqrt_eps(Var a, double eps);    // elementwise 1/sqrt(x + eps)

  Var sum(Var a);  // 1 x 1
  Var gather_rows(Var a, std::vector<int> idx);
  Var concat_cols(const std::vector<Var>& parts);
  Var slice_cols(Var a, int begin, int count);
  Var softmax_block_rows(Var a, int block);  // per column over row blocks
  Var sum_block_rows(Var a, int block);
  Var log_softmax_rows(Var a);
  Var layer_norm_rows(Var a, double eps = 1e-5);
  Var rowdot(Var a, Var b);   // r x 1
  Var rowcross(Var a, Var b); // r x 3
  // Unit rows; rows with norm below eps become the matching fallback row
  // and pass no gradient.  Optional per-row degeneracy flags.
  Var normalize_rows_guarded(Var a, double eps, const Mat& fallback,
                             std::vector<char>* degenerate = nullptr);
  Var mask_rows(Var a, Vec mask);        // constant per-row scaling
  Var project_zero_mean(Var a);          // subtract the column mean
  Var symmetrize_pairs(Var a, int n);    // average rows i*n+j and j*n+i

  void backward(Var scalar_output);
  const Mat& value(Var v) const;
  const Mat& grad(Var v) const;          // valid after backward
  Mat grad_or_zero(Var v) const;         // zeros when the output ignores v
  bool requires_grad(Var v) const;
  int size() const { return static_cast<int>(nodes_.size()); }

 private:
  using BackFn = std::function<void(Tape&, int self)>;

  struct Node {
    Mat value;
    Mat grad;
    bool requires_grad = false;
    BackFn backprop;  // empty for leaves
  };

  Var make(Mat value, bool requires_grad, BackFn backprop);
  bool any_grad(Var a) const { return requires_grad(a); }
  bool any_grad(Var a, Var b) const { return requires_grad(a) || requires_grad(b); }
  const Mat& out_grad(int self) const { return nodes_[self].grad; }
  Mat& grad_ref(int id);
  void add_grad(int id, const Mat& g);

  std::vector<Node> nodes_;
  friend struct Var;
};

inline const Mat& Var::value() const { return tape->value(*this); }

}  // namespace pmol::ad

#endif  // PMOL_AUTODIFF_HPP
