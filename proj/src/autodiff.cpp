//
// Project promptmol - Copyright 2026 the promptmol authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "pmol/autodiff.hpp"

#include <cmath>

namespace pmol::ad {

namespace {

void check_same_shape(const Mat& a, const Mat& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    fail_config(op, ": shapes ", a.rows(), "x", a.cols(), " and ", b.rows(), "x",
                b.cols(), " differ");
}

Mat sigmoid(const Mat& x) {
  return x.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
}

// Elementwise maps go through these scalar wrappers instead of Eigen's
// vectorized array functions.  The SIMD kernels and the scalar tail can
// disagree in the last ulp, so which lane an atom lands in would otherwise
// leak into the output and break exact permutation equivariance.
Mat scalar_exp(const Mat& x) {
  return x.unaryExpr([](double v) { return std::exp(v); });
}

Mat scalar_tanh(const Mat& x) {
  return x.unaryExpr([](double v) { return std::tanh(v); });
}

Mat scalar_log(const Mat& x) {
  return x.unaryExpr([](double v) { return std::log(v); });
}

Mat scalar_rsqrt_eps(const Mat& x, double eps) {
  return x.unaryExpr([eps](double v) { return 1.0 / std::sqrt(v + eps); });
}

}  // namespace

Var Tape::make(Mat value, bool requires_grad, BackFn backprop) {
  nodes_.push_back(
      Node{std::move(value), Mat(), requires_grad, std::move(backprop)});
  return Var{static_cast<int>(nodes_.size()) - 1, this};
}

Var Tape::input(Mat value, bool requires_grad) {
  return make(std::move(value), requires_grad, nullptr);
}

const Mat& Tape::value(Var v) const { return nodes_.at(v.id).value; }

const Mat& Tape::grad(Var v) const {
  const Node& n = nodes_.at(v.id);
  if (n.grad.size() == 0) fail_runtime("gradient not populated; run backward first");
  return n.grad;
}

Mat Tape::grad_or_zero(Var v) const {
  const Node& n = nodes_.at(v.id);
  if (n.grad.size() == 0) return Mat::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

bool Tape::requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }

Mat& Tape::grad_ref(int id) {
  Node& n = nodes_[id];
  if (n.grad.size() == 0) n.grad = Mat::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::add_grad(int id, const Mat& g) {
  if (!nodes_[id].requires_grad) return;
  grad_ref(id) += g;
}

void Tape::backward(Var out) {
  const Node& last = nodes_.at(out.id);
  if (last.value.rows() != 1 || last.value.cols() != 1)
    fail_config("backward expects a 1x1 output node");
  for (Node& n : nodes_) n.grad = Mat();
  grad_ref(out.id)(0, 0) = 1.0;
  for (int id = out.id; id >= 0; --id) {
    Node& n = nodes_[id];
    if (!n.requires_grad || !n.backprop || n.grad.size() == 0) continue;
    n.backprop(*this, id);
  }
}

Var Tape::add(Var a, Var b) {
  check_same_shape(value(a), value(b), "add");
  const int ia = a.id, ib = b.id;
  return make(value(a) + value(b), any_grad(a, b), [ia, ib](Tape& t, int self) {
    t.add_grad(ia, t.out_grad(self));
    t.add_grad(ib, t.out_grad(self));
  });
}

Var Tape::sub(Var a, Var b) {
  check_same_shape(value(a), value(b), "sub");
  const int ia = a.id, ib = b.id;
  return make(value(a) - value(b), any_grad(a, b), [ia, ib](Tape& t, int self) {
    t.add_grad(ia, t.out_grad(self));
    t.add_grad(ib, -t.out_grad(self));
  });
}

Var Tape::mul(Var a, Var b) {
  check_same_shape(value(a), value(b), "mul");
  const int ia = a.id, ib = b.id;
  return make(value(a).cwiseProduct(value(b)), any_grad(a, b),
              [ia, ib](Tape& t, int self) {
                const Mat& g = t.out_grad(self);
                t.add_grad(ia, g.cwiseProduct(t.nodes_[ib].value));
                t.add_grad(ib, g.cwiseProduct(t.nodes_[ia].value));
              });
}

Var Tape::matmul(Var a, Var b) {
  if (value(a).cols() != value(b).rows())
    fail_config("matmul: inner dimensions ", value(a).cols(), " and ",
                value(b).rows(), " differ");
  // Row-by-row product: every output row takes the same kernel path, so
  // equal input rows give bit-equal output rows wherever they sit.  A full
  // gemm routes panel rows and tail rows differently, which breaks exact
  // permutation equivariance.
  const Mat& va = value(a);
  const Mat& vb = value(b);
  Mat out(va.rows(), vb.cols());
  for (int r = 0; r < va.rows(); ++r) out.row(r).noalias() = va.row(r) * vb;
  const int ia = a.id, ib = b.id;
  return make(std::move(out), any_grad(a, b), [ia, ib](Tape& t, int self) {
    const Mat& g = t.out_grad(self);
    t.add_grad(ia, g * t.nodes_[ib].value.transpose());
    t.add_grad(ib, t.nodes_[ia].value.transpose() * g);
  });
}

Var Tape::scale(Var a, double s) {
  const int ia = a.id;
  return make(value(a) * s, any_grad(a), [ia, s](Tape& t, int self) {
    t.add_grad(ia, s * t.out_grad(self));
  });
}

Var Tape::add_scalar(Var a, double s) {
  const int ia = a.id;
  return make(value(a).array() + s, any_grad(a), [ia](Tape& t, int self) {
    t.add_grad(ia, t.out_grad(self));
  });
}

Var Tape::transpose(Var a) {
  const int ia = a.id;
  return make(value(a).transpose(), any_grad(a), [ia](Tape& t, int self) {
    t.add_grad(ia, t.out_grad(self).transpose());
  });
}

Var Tape::add_rowvec(Var a, Var row) {
  if (value(row).rows() != 1 || value(row).cols() != value(a).cols())
    fail_config("add_rowvec: broadcast shape mismatch");
  const int ia = a.id, ir = row.id;
  Mat out = value(a);
  out.rowwise() += value(row).row(0);
  return make(std::move(out), any_grad(a, row), [ia, ir](Tape& t, int self) {
    const Mat& g = t.out_grad(self);
    t.add_grad(ia, g);
    t.add_grad(ir, g.colwise().sum());
  });
}

Var Tape::mul_rowvec(Var a, Var row) {
  if (value(row).rows() != 1 || value(row).cols() != value(a).cols())
    fail_config("mul_rowvec: broadcast shape mismatch");
  const int ia = a.id, ir = row.id;
  Mat out = value(a);
  out.array().rowwise() *= value(row).row(0).array();
  return make(std::move(out), any_grad(a, row), [ia, ir](Tape& t, int self) {
    const Mat& g = t.out_grad(self);
    Mat ga = g;
    ga.array().rowwise() *= t.nodes_[ir].value.row(0).array();
    t.add_grad(ia, ga);
    t.add_grad(ir, g.cwiseProduct(t.nodes_[ia].value).colwise().sum());
  });
}

Var Tape::mul_colvec(Var a, Var col) {
  if (value(col).cols() != 1 || value(col).rows() != value(a).rows())
    fail_config("mul_colvec: broadcast shape mismatch");
  const int ia = a.id, ic = col.id;
  Mat out = value(a);
  out.array().colwise() *= value(col).col(0).array();
  return make(std::move(out), any_grad(a, col), [ia, ic](Tape& t, int self) {
    const Mat& g = t.out_grad(self);
    Mat ga = g;
    ga.array().colwise() *= t.nodes_[ic].value.col(0).array();
    t.add_grad(ia, ga);
    t.add_grad(ic, g.cwiseProduct(t.nodes_[ia].value).rowwise().sum());
  });
}

Var Tape::mul_scalar_node(Var a, Var s) {
  if (value(s).rows() != 1 || value(s).cols() != 1)
    fail_config("mul_scalar_node: scalar operand must be 1x1");
  const int ia = a.id, is = s.id;
  return make(value(a) * value(s)(0, 0), any_grad(a, s),
              [ia, is](Tape& t, int self) {
                const Mat& g = t.out_grad(self);
                t.add_grad(ia, g * t.nodes_[is].value(0, 0));
                Mat gs(1, 1);
                gs(0, 0) = g.cwiseProduct(t.nodes_[ia].value).sum();
                t.add_grad(is, gs);
              });
}

Var Tape::silu(Var a) {
  const int ia = a.id;
  const Mat sig = sigmoid(value(a));
  return make(value(a).cwiseProduct(sig), any_grad(a), [ia](Tape& t, int self) {
    const Mat& x = t.nodes_[ia].value;
    const Mat s = sigmoid(x);
    const Mat d = s.cwiseProduct(Mat::Ones(x.rows(), x.cols()) +
                                 x.cwiseProduct(Mat::Ones(x.rows(), x.cols()) - s));
    t.add_grad(ia, t.out_grad(self).cwiseProduct(d));
  });
}

Var Tape::tanh_(Var a) {
  const int ia = a.id;
  Mat out = scalar_tanh(value(a));
  return make(std::move(out), any_grad(a), [ia](Tape& t, int self) {
    const Mat y = scalar_tanh(t.nodes_[ia].value);
    const Mat d = Mat::Ones(y.rows(), y.cols()) - y.cwiseProduct(y);
    t.add_grad(ia, t.out_grad(self).cwiseProduct(d));
  });
}

Var Tape::exp_(Var a) {
  const int ia = a.id;
  Mat out = scalar_exp(value(a));
  return make(std::move(out), any_grad(a), [ia](Tape& t, int self) {
    const Mat y = scalar_exp(t.nodes_[ia].value);
    t.add_grad(ia, t.out_grad(self).cwiseProduct(y));
  });
}

Var Tape::log_(Var a) {
  if (value(a).minCoeff() <= 0.0)
    fail_runtime("log of non-positive value on tape");
  const int ia = a.id;
  Mat out = scalar_log(value(a));
  return make(std::move(out), any_grad(a), [ia](Tape& t, int self) {
    t.add_grad(ia, t.out_grad(self).cwiseQuotient(t.nodes_[ia].value));
  });
}

Var Tape::inv_sqrt_eps(Var a, double eps) {
  const int ia = a.id;
  Mat out = scalar_rsqrt_eps(value(a), eps);
  return make(std::move(out), any_grad(a), [ia, eps](Tape& t, int self) {
    const Mat y = scalar_rsqrt_eps(t.nodes_[ia].value, eps);
    const Mat d = -0.5 * y.array().cube();
    t.add_grad(ia, t.out_grad(self).cwiseProduct(d));
  });
}

Var Tape::sum(Var a) {
  const int ia = a.id;
  const Mat& x = value(a);
  Mat out(1, 1);
  out(0, 0) = canonical_sum(
      std::vector<double>(x.data(), x.data() + x.size()));
  return make(std::move(out), any_grad(a), [ia](Tape& t, int self) {
    const Node& n = t.nodes_[ia];
    t.add_grad(ia, Mat::Constant(n.value.rows(), n.value.cols(),
                                 t.out_grad(self)(0, 0)));
  });
}

Var Tape::gather_rows(Var a, std::vector<int> idx) {
  const Mat& src = value(a);
  Mat out(static_cast<int>(idx.size()), src.cols());
  for (int r = 0; r < out.rows(); ++r) {
    if (idx[r] < 0 || idx[r] >= src.rows())
      fail_config("gather_rows: index ", idx[r], " out of range");
    out.row(r) = src.row(idx[r]);
  }
  const int ia = a.id;
  return make(std::move(out), any_grad(a),
              [ia, idx = std::move(idx)](Tape& t, int self) {
                const Mat& g = t.out_grad(self);
                Mat ga = Mat::Zero(t.nodes_[ia].value.rows(),
                                   t.nodes_[ia].value.cols());
                for (int r = 0; r < g.rows(); ++r) ga.row(idx[r]) += g.row(r);
                t.add_grad(ia, ga);
              });
}

Var Tape::concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) fail_config("concat_cols of nothing");
  const int rows = parts[0].rows();
  int cols = 0;
  bool rg = false;
  for (const Var& p : parts) {
    if (p.rows() != rows) fail_config("concat_cols: row counts differ");
    cols += p.cols();
    rg = rg || requires_grad(p);
  }
  Mat out(rows, cols);
  std::vector<int> ids;
  std::vector<int> offsets;
  int at = 0;
  for (const Var& p : parts) {
    out.middleCols(at, p.cols()) = value(p);
    ids.push_back(p.id);
    offsets.push_back(at);
    at += p.cols();
  }
  return make(std::move(out), rg,
              [ids = std::move(ids), offsets = std::move(offsets)](Tape& t, int self) {
                const Mat& g = t.out_grad(self);
                for (std::size_t k = 0; k < ids.size(); ++k) {
                  const int w = static_cast<int>(t.nodes_[ids[k]].value.cols());
                  t.add_grad(ids[k], g.middleCols(offsets[k], w));
                }
              });
}

Var Tape::slice_cols(Var a, int begin, int count) {
  if (begin < 0 || count < 1 || begin + count > value(a).cols())
    fail_config("slice_cols out of range");
  const int ia = a.id;
  return make(value(a).middleCols(begin, count), any_grad(a),
              [ia, begin, count](Tape& t, int self) {
                const Node& n = t.nodes_[ia];
                Mat ga = Mat::Zero(n.value.rows(), n.value.cols());
                ga.middleCols(begin, count) = t.out_grad(self);
                t.add_grad(ia, ga);
              });
}

Var Tape::softmax_block_rows(Var a, int block) {
  const Mat& x = value(a);
  if (block < 1 || x.rows() % block != 0)
    fail_config("softmax_block_rows: block ", block, " does not divide ", x.rows());
  Mat out(x.rows(), x.cols());
  for (int g0 = 0; g0 < x.rows(); g0 += block) {
    auto blk = x.middleRows(g0, block);
    for (int c = 0; c < x.cols(); ++c) {
      const double m = blk.col(c).maxCoeff();
      Eigen::VectorXd e(block);
      for (int r = 0; r < block; ++r) e[r] = std::exp(blk(r, c) - m);
      const double denom =
          canonical_sum(std::vector<double>(e.data(), e.data() + e.size()));
      out.col(c).segment(g0, block) = e / denom;
    }
  }
  const int ia = a.id;
  return make(std::move(out), any_grad(a), [ia, block](Tape& t, int self) {
    const Mat& y = t.nodes_[self].value;
    const Mat& g = t.out_grad(self);
    Mat ga(y.rows(), y.cols());
    for (int g0 = 0; g0 < y.rows(); g0 += block) {
      for (int c = 0; c < y.cols(); ++c) {
        const auto yb = y.col(c).segment(g0, block);
        const auto gb = g.col(c).segment(g0, block);
        const double dot = yb.dot(gb);
        ga.col(c).segment(g0, block) =
            yb.cwiseProduct(gb - Eigen::VectorXd::Constant(block, dot));
      }
    }
    t.add_grad(ia, ga);
  });
}

Var Tape::sum_block_rows(Var a, int block) {
  const Mat& x = value(a);
  if (block < 1 || x.rows() % block != 0)
    fail_config("sum_block_rows: block ", block, " does not divide ", x.rows());
  const int groups = static_cast<int>(x.rows()) / block;
  Mat out = Mat::Zero(groups, x.cols());
  std::vector<double> terms(block);
  for (int g0 = 0; g0 < groups; ++g0)
    for (int c = 0; c < x.cols(); ++c) {
      for (int r = 0; r < block; ++r) terms[r] = x(g0 * block + r, c);
      out(g0, c) = canonical_sum(terms);
    }
  const int ia = a.id;
  return make(std::move(out), any_grad(a), [ia, block](Tape& t, int self) {
    const Mat& g = t.out_grad(self);
    const Node& n = t.nodes_[ia];
    Mat ga(n.value.rows(), n.value.cols());
    for (int r = 0; r < ga.rows(); ++r) ga.row(r) = g.row(r / block);
    t.add_grad(ia, ga);
  });
}

Var Tape::log_softmax_rows(Var a) {
  const Mat& x = value(a);
  Mat out(x.rows(), x.cols());
  for (int r = 0; r < x.rows(); ++r) {
    const double m = x.row(r).maxCoeff();
    const double lse = m + std::log((x.row(r).array() - m).exp().sum());
    out.row(r) = x.row(r).array() - lse;
  }
  const int ia = a.id;
  return make(std::move(out), any_grad(a), [ia](Tape& t, int self) {
    const Mat& y = t.nodes_[self].value;
    const Mat& g = t.out_grad(self);
    Mat ga(y.rows(), y.cols());
    for (int r = 0; r < y.rows(); ++r) {
      const double gsum = g.row(r).sum();
      ga.row(r) = g.row(r) - gsum * y.row(r).array().exp().matrix();
    }
    t.add_grad(ia, ga);
  });
}

Var Tape::layer_norm_rows(Var a, double eps) {
  const Mat& x = value(a);
  Mat out(x.rows(), x.cols());
  Vec inv_std(x.rows());
  for (int r = 0; r < x.rows(); ++r) {
    const double mean = x.row(r).mean();
    const double var = (x.row(r).array() - mean).square().mean();
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    out.row(r) = (x.row(r).array() - mean) * inv_std[r];
  }
  const int ia = a.id;
  return make(std::move(out), any_grad(a),
              [ia, inv_std = std::move(inv_std)](Tape& t, int self) {
                const Mat& y = t.nodes_[self].value;
                const Mat& g = t.out_grad(self);
                Mat ga(y.rows(), y.cols());
                for (int r = 0; r < y.rows(); ++r) {
                  const double gm = g.row(r).mean();
                  const double gy = g.row(r).cwiseProduct(y.row(r)).mean();
                  ga.row(r) =
                      inv_std[r] * (g.row(r).array() - gm - y.row(r).array() * gy);
                }
                t.add_grad(ia, ga);
              });
}

Var Tape::rowdot(Var a, Var b) {
  check_same_shape(value(a), value(b), "rowdot");
  const int ia = a.id, ib = b.id;
  Mat out = value(a).cwiseProduct(value(b)).rowwise().sum();
  return make(std::move(out), any_grad(a, b), [ia, ib](Tape& t, int self) {
    const Mat& g = t.out_grad(self);  // r x 1
    Mat ga = t.nodes_[ib].value;
    ga.array().colwise() *= g.col(0).array();
    t.add_grad(ia, ga);
    Mat gb = t.nodes_[ia].value;
    gb.array().colwise() *= g.col(0).array();
    t.add_grad(ib, gb);
  });
}

namespace {

Mat crossed(const Mat& a, const Mat& b) {
  Mat out(a.rows(), 3);
  for (int r = 0; r < a.rows(); ++r) {
    const Vec3 x = a.row(r).transpose();
    const Vec3 y = b.row(r).transpose();
    out.row(r) = x.cross(y).transpose();
  }
  return out;
}

}  // namespace

Var Tape::rowcross(Var a, Var b) {
  check_same_shape(value(a), value(b), "rowcross");
  if (value(a).cols() != 3) fail_config("rowcross needs 3 columns");
  const int ia = a.id, ib = b.id;
  return make(crossed(value(a), value(b)), any_grad(a, b),
              [ia, ib](Tape& t, int self) {
                const Mat& g = t.out_grad(self);
                // y = a x b:  da = b x g,  db = g x a  (per row)
                t.add_grad(ia, crossed(t.nodes_[ib].value, g));
                t.add_grad(ib, crossed(g, t.nodes_[ia].value));
              });
}

Var Tape::normalize_rows_guarded(Var a, double eps, const Mat& fallback,
                                 std::vector<char>* degenerate) {
  const Mat& x = value(a);
  check_same_shape(x, fallback, "normalize_rows_guarded");
  Mat out(x.rows(), x.cols());
  Vec norms(x.rows());
  std::vector<char> degen(x.rows(), 0);
  for (int r = 0; r < x.rows(); ++r) {
    norms[r] = x.row(r).norm();
    if (norms[r] < eps) {
      degen[r] = 1;
      out.row(r) = fallback.row(r);
    } else {
      out.row(r) = x.row(r) / norms[r];
    }
  }
  if (degenerate) *degenerate = degen;
  const int ia = a.id;
  return make(std::move(out), any_grad(a),
              [ia, norms = std::move(norms), degen = std::move(degen)](Tape& t,
                                                                       int self) {
                const Mat& y = t.nodes_[self].value;
                const Mat& g = t.out_grad(self);
                Mat ga = Mat::Zero(y.rows(), y.cols());
                for (int r = 0; r < y.rows(); ++r) {
                  if (degen[r]) continue;  // constant fallback, no gradient
                  const double gy = g.row(r).dot(y.row(r));
                  ga.row(r) = (g.row(r) - gy * y.row(r)) / norms[r];
                }
                t.add_grad(ia, ga);
              });
}

Var Tape::mask_rows(Var a, Vec mask) {
  if (mask.size() != value(a).rows())
    fail_config("mask_rows: mask length mismatch");
  Mat out = value(a);
  out.array().colwise() *= mask.array();
  const int ia = a.id;
  return make(std::move(out), any_grad(a),
              [ia, mask = std::move(mask)](Tape& t, int self) {
                Mat ga = t.out_grad(self);
                ga.array().colwise() *= mask.array();
                t.add_grad(ia, ga);
              });
}

Var Tape::project_zero_mean(Var a) {
  const int ia = a.id;
  Mat out = value(a);
  RowVec means(out.cols());
  std::vector<double> terms(out.rows());
  for (int c = 0; c < out.cols(); ++c) {
    for (int r = 0; r < out.rows(); ++r) terms[r] = out(r, c);
    means(c) = canonical_sum(terms) / out.rows();
  }
  out.rowwise() -= means;
  return make(std::move(out), any_grad(a), [ia](Tape& t, int self) {
    Mat g = t.out_grad(self);
    g.rowwise() -= t.out_grad(self).colwise().mean().eval();
    t.add_grad(ia, g);
  });
}

Var Tape::symmetrize_pairs(Var a, int n) {
  const Mat& x = value(a);
  if (x.rows() != static_cast<long>(n) * n)
    fail_config("symmetrize_pairs expects n*n rows");
  auto symmetrized = [n](const Mat& m) {
    Mat out(m.rows(), m.cols());
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        out.row(i * n + j) = 0.5 * (m.row(i * n + j) + m.row(j * n + i));
    return out;
  };
  const int ia = a.id;
  return make(symmetrized(x), any_grad(a), [ia, symmetrized](Tape& t, int self) {
    t.add_grad(ia, symmetrized(t.out_grad(self)));
  });
}

}  // namespace pmol::ad
