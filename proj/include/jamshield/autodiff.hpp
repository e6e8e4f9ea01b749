#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include "jamshield/common.hpp"

namespace jamshield::ad {

using Mat = Eigen::MatrixXd;

// Reverse-mode tape over dense matrices. Build a fresh tape per loss
// evaluation; backward() walks the nodes once in reverse creation order.
//
// Matrix products are evaluated row by row so that any row's result is
// independent of which other rows share the batch. Recomputing a quantity for
// a subset of rows therefore reproduces the original bits exactly.
class Tape {
 public:
  struct Var {
    int idx = -1;
    bool valid() const { return idx >= 0; }
  };

  Var input(const Mat& value, bool requires_grad = false) {
    return push(value, requires_grad, nullptr);
  }

  const Mat& val(Var x) const { return nodes_[check(x)].value; }

  const Mat& grad(Var x) const {
    const Node& n = nodes_[check(x)];
    if (n.grad.size() == 0) {
      static const Mat empty;
      grad_zero_.resize(n.value.rows(), n.value.cols());
      grad_zero_.setZero();
      return grad_zero_;
    }
    return n.grad;
  }

  void backward(Var root) {
    Node& r = nodes_[check(root)];
    if (r.value.size() != 1)
      throw std::domain_error("backward: root must be scalar");
    for (auto& n : nodes_) n.grad.resize(0, 0);
    r.grad = Mat::Ones(1, 1);
    for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i) {
      Node& n = nodes_[i];
      if (n.back && n.grad.size() != 0) n.back(*this, n.grad);
    }
  }

  size_t size() const { return nodes_.size(); }

  // ---- arithmetic ----

  Var matmul(Var a, Var b) {
    const Mat& A = val(a);
    const Mat& B = val(b);
    if (A.cols() != B.rows()) throw std::domain_error("matmul: shape mismatch");
    Mat y(A.rows(), B.cols());
    for (int r = 0; r < A.rows(); ++r) y.row(r) = A.row(r) * B;
    return push(std::move(y), needs(a) || needs(b),
                [a, b](Tape& t, const Mat& g) {
                  if (t.needs(a)) t.accum(a, g * t.val(b).transpose());
                  if (t.needs(b)) t.accum(b, t.val(a).transpose() * g);
                });
  }

  Var add(Var a, Var b) {
    same_shape(a, b, "add");
    return push(val(a) + val(b), needs(a) || needs(b),
                [a, b](Tape& t, const Mat& g) {
                  if (t.needs(a)) t.accum(a, g);
                  if (t.needs(b)) t.accum(b, g);
                });
  }

  Var sub(Var a, Var b) {
    same_shape(a, b, "sub");
    return push(val(a) - val(b), needs(a) || needs(b),
                [a, b](Tape& t, const Mat& g) {
                  if (t.needs(a)) t.accum(a, g);
                  if (t.needs(b)) t.accum(b, -g);
                });
  }

  Var mul(Var a, Var b) {
    same_shape(a, b, "mul");
    return push(val(a).cwiseProduct(val(b)), needs(a) || needs(b),
                [a, b](Tape& t, const Mat& g) {
                  if (t.needs(a)) t.accum(a, g.cwiseProduct(t.val(b)));
                  if (t.needs(b)) t.accum(b, g.cwiseProduct(t.val(a)));
                });
  }

  Var add_rowvec(Var a, Var b) {
    const Mat& A = val(a);
    const Mat& B = val(b);
    if (B.rows() != 1 || B.cols() != A.cols())
      throw std::domain_error("add_rowvec: needs 1 x cols(a)");
    Mat y = A.rowwise() + B.row(0);
    return push(std::move(y), needs(a) || needs(b),
                [a, b](Tape& t, const Mat& g) {
                  if (t.needs(a)) t.accum(a, g);
                  if (t.needs(b)) t.accum(b, g.colwise().sum());
                });
  }

  Var mul_rowvec(Var a, Var b) {
    const Mat& A = val(a);
    const Mat& B = val(b);
    if (B.rows() != 1 || B.cols() != A.cols())
      throw std::domain_error("mul_rowvec: needs 1 x cols(a)");
    Mat y = A.array().rowwise() * B.row(0).array();
    return push(std::move(y), needs(a) || needs(b),
                [a, b](Tape& t, const Mat& g) {
                  if (t.needs(a))
                    t.accum(a, g.array().rowwise() * t.val(b).row(0).array());
                  if (t.needs(b))
                    t.accum(b, g.cwiseProduct(t.val(a)).colwise().sum());
                });
  }

  Var add_colvec(Var a, Var b) {
    const Mat& A = val(a);
    const Mat& B = val(b);
    if (B.cols() != 1 || B.rows() != A.rows())
      throw std::domain_error("add_colvec: needs rows(a) x 1");
    Mat y = A.colwise() + B.col(0);
    return push(std::move(y), needs(a) || needs(b),
                [a, b](Tape& t, const Mat& g) {
                  if (t.needs(a)) t.accum(a, g);
                  if (t.needs(b)) t.accum(b, g.rowwise().sum());
                });
  }

  // y = a + coeff * s, s scalar (1x1) broadcast everywhere
  Var add_scalar_var(Var a, Var s, double coeff = 1.0) {
    const Mat& S = val(s);
    if (S.size() != 1) throw std::domain_error("add_scalar_var: s must be 1x1");
    Mat y = val(a).array() + coeff * S(0, 0);
    return push(std::move(y), needs(a) || needs(s),
                [a, s, coeff](Tape& t, const Mat& g) {
                  if (t.needs(a)) t.accum(a, g);
                  if (t.needs(s)) {
                    Mat gs(1, 1);
                    gs(0, 0) = coeff * g.sum();
                    t.accum(s, gs);
                  }
                });
  }

  Var scale(Var a, double c) {
    return push(c * val(a), needs(a), [a, c](Tape& t, const Mat& g) {
      if (t.needs(a)) t.accum(a, c * g);
    });
  }

  Var add_const(Var a, double c) {
    return push(val(a).array() + c, needs(a), [a](Tape& t, const Mat& g) {
      if (t.needs(a)) t.accum(a, g);
    });
  }

  Var scale_var(Var a, Var s) {
    const Mat& S = val(s);
    if (S.size() != 1) throw std::domain_error("scale_var: s must be 1x1");
    return push(S(0, 0) * val(a), needs(a) || needs(s),
                [a, s](Tape& t, const Mat& g) {
                  if (t.needs(a)) t.accum(a, t.val(s)(0, 0) * g);
                  if (t.needs(s)) {
                    Mat gs(1, 1);
                    gs(0, 0) = g.cwiseProduct(t.val(a)).sum();
                    t.accum(s, gs);
                  }
                });
  }

  // ---- nonlinearities ----

  Var tanh_(Var a) {
    Mat y = val(a).array().tanh();
    Var out = push(y, needs(a), nullptr);
    if (needs(a))
      nodes_[out.idx].back = [a, out](Tape& t, const Mat& g) {
        const Mat& y2 = t.val(out);
        t.accum(a, g.cwiseProduct((1.0 - y2.array().square()).matrix()));
      };
    return out;
  }

  Var gelu(Var a) {
    Mat y = val(a).unaryExpr([](double x) {
      return 0.5 * x * (1.0 + std::erf(x / kSqrt2));
    });
    return push(std::move(y), needs(a), [a](Tape& t, const Mat& g) {
      if (!t.needs(a)) return;
      Mat d = t.val(a).unaryExpr([](double x) {
        double cdf = 0.5 * (1.0 + std::erf(x / kSqrt2));
        double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * kPi);
        return cdf + x * pdf;
      });
      t.accum(a, g.cwiseProduct(d));
    });
  }

  Var exp_(Var a) {
    Mat y = val(a).array().exp();
    Var out = push(y, needs(a), nullptr);
    if (needs(a))
      nodes_[out.idx].back = [a, out](Tape& t, const Mat& g) {
        t.accum(a, g.cwiseProduct(t.val(out)));
      };
    return out;
  }

  Var log_(Var a) {
    return push(val(a).array().log(), needs(a), [a](Tape& t, const Mat& g) {
      if (t.needs(a)) t.accum(a, g.cwiseQuotient(t.val(a)));
    });
  }

  Var clip_const(Var a, double lo, double hi) {
    Mat y = val(a).array().max(lo).min(hi);
    return push(std::move(y), needs(a), [a, lo, hi](Tape& t, const Mat& g) {
      if (!t.needs(a)) return;
      const auto x = t.val(a).array();
      Mat mask = ((x > lo) && (x < hi)).cast<double>();
      t.accum(a, g.cwiseProduct(mask));
    });
  }

  Var min_(Var a, Var b) {
    same_shape(a, b, "min");
    Mat y = val(a).cwiseMin(val(b));
    return push(std::move(y), needs(a) || needs(b),
                [a, b](Tape& t, const Mat& g) {
                  Mat take_a =
                      (t.val(a).array() <= t.val(b).array()).cast<double>();
                  if (t.needs(a)) t.accum(a, g.cwiseProduct(take_a));
                  if (t.needs(b))
                    t.accum(b, g.cwiseProduct((1.0 - take_a.array()).matrix()));
                });
  }

  Var max_(Var a, Var b) {
    same_shape(a, b, "max");
    Mat y = val(a).cwiseMax(val(b));
    return push(std::move(y), needs(a) || needs(b),
                [a, b](Tape& t, const Mat& g) {
                  Mat take_a =
                      (t.val(a).array() >= t.val(b).array()).cast<double>();
                  if (t.needs(a)) t.accum(a, g.cwiseProduct(take_a));
                  if (t.needs(b))
                    t.accum(b, g.cwiseProduct((1.0 - take_a.array()).matrix()));
                });
  }

  // ---- reductions ----

  Var sum_all(Var a) {
    Mat y(1, 1);
    y(0, 0) = val(a).sum();
    return push(std::move(y), needs(a), [a](Tape& t, const Mat& g) {
      if (t.needs(a))
        t.accum(a, Mat::Constant(t.val(a).rows(), t.val(a).cols(), g(0, 0)));
    });
  }

  Var mean_all(Var a) {
    double n = static_cast<double>(val(a).size());
    Mat y(1, 1);
    y(0, 0) = val(a).sum() / n;
    return push(std::move(y), needs(a), [a, n](Tape& t, const Mat& g) {
      if (t.needs(a))
        t.accum(a,
                Mat::Constant(t.val(a).rows(), t.val(a).cols(), g(0, 0) / n));
    });
  }

  Var rowsum(Var a) {
    Mat y = val(a).rowwise().sum();
    return push(std::move(y), needs(a), [a](Tape& t, const Mat& g) {
      if (t.needs(a))
        t.accum(a, g.col(0).replicate(1, t.val(a).cols()));
    });
  }

  Var rowmean(Var a) {
    double n = static_cast<double>(val(a).cols());
    Mat y = val(a).rowwise().mean();
    return push(std::move(y), needs(a), [a, n](Tape& t, const Mat& g) {
      if (t.needs(a))
        t.accum(a, (g.col(0) / n).replicate(1, t.val(a).cols()));
    });
  }

  Var logsumexp_rows(Var a) {
    const Mat& A = val(a);
    Mat y(A.rows(), 1);
    for (int r = 0; r < A.rows(); ++r) {
      double m = A.row(r).maxCoeff();
      double s = (A.row(r).array() - m).exp().sum();
      y(r, 0) = m + std::log(s);
    }
    Var out = push(std::move(y), needs(a), nullptr);
    if (needs(a))
      nodes_[out.idx].back = [a, out](Tape& t, const Mat& g) {
        const Mat& A2 = t.val(a);
        const Mat& L = t.val(out);
        Mat d(A2.rows(), A2.cols());
        for (int r = 0; r < A2.rows(); ++r)
          d.row(r) = g(r, 0) * (A2.row(r).array() - L(r, 0)).exp().matrix();
        t.accum(a, std::move(d));
      };
    return out;
  }

  // y(r) = a(r, idx[r])
  Var select_cols(Var a, std::vector<int> idx) {
    const Mat& A = val(a);
    if (static_cast<int>(idx.size()) != A.rows())
      throw std::domain_error("select_cols: one index per row required");
    Mat y(A.rows(), 1);
    for (int r = 0; r < A.rows(); ++r) {
      if (idx[r] < 0 || idx[r] >= A.cols())
        throw std::domain_error("select_cols: index out of range");
      y(r, 0) = A(r, idx[r]);
    }
    return push(std::move(y), needs(a),
                [a, idx = std::move(idx)](Tape& t, const Mat& g) {
                  if (!t.needs(a)) return;
                  Mat d = Mat::Zero(t.val(a).rows(), t.val(a).cols());
                  for (int r = 0; r < d.rows(); ++r) d(r, idx[r]) += g(r, 0);
                  t.accum(a, std::move(d));
                });
  }

  Var softmax_rows(Var a) {
    const Mat& A = val(a);
    Mat y(A.rows(), A.cols());
    for (int r = 0; r < A.rows(); ++r) {
      Eigen::ArrayXd e = (A.row(r).array() - A.row(r).maxCoeff()).exp();
      y.row(r) = (e / e.sum()).matrix();
    }
    Var out = push(std::move(y), needs(a), nullptr);
    if (needs(a))
      nodes_[out.idx].back = [a, out](Tape& t, const Mat& g) {
        const Mat& Y = t.val(out);
        Mat d(Y.rows(), Y.cols());
        for (int r = 0; r < Y.rows(); ++r) {
          double dot = g.row(r).dot(Y.row(r));
          d.row(r) = Y.row(r).cwiseProduct(
              (g.row(r).array() - dot).matrix());
        }
        t.accum(a, std::move(d));
      };
    return out;
  }

  // ---- shape ----

  Var concat_cols(Var a, Var b) {
    const Mat& A = val(a);
    const Mat& B = val(b);
    if (A.rows() != B.rows()) throw std::domain_error("concat_cols: row mismatch");
    Mat y(A.rows(), A.cols() + B.cols());
    y << A, B;
    int ca = static_cast<int>(A.cols());
    return push(std::move(y), needs(a) || needs(b),
                [a, b, ca](Tape& t, const Mat& g) {
                  if (t.needs(a)) t.accum(a, g.leftCols(ca));
                  if (t.needs(b)) t.accum(b, g.rightCols(g.cols() - ca));
                });
  }

  Var slice_cols(Var a, int start, int count) {
    const Mat& A = val(a);
    if (start < 0 || count < 0 || start + count > A.cols())
      throw std::domain_error("slice_cols: range out of bounds");
    Mat y = A.middleCols(start, count);
    return push(std::move(y), needs(a), [a, start, count](Tape& t, const Mat& g) {
      if (!t.needs(a)) return;
      Mat d = Mat::Zero(t.val(a).rows(), t.val(a).cols());
      d.middleCols(start, count) = g;
      t.accum(a, std::move(d));
    });
  }

  // ---- structured layers ----

  Var layernorm_rows(Var a, Var gamma, Var beta, double eps = 1e-5) {
    const Mat& A = val(a);
    const Mat& G = val(gamma);
    const Mat& Be = val(beta);
    if (G.rows() != 1 || G.cols() != A.cols() || Be.rows() != 1 ||
        Be.cols() != A.cols())
      throw std::domain_error("layernorm_rows: gamma/beta must be 1 x cols");
    Mat xhat(A.rows(), A.cols());
    Mat inv(A.rows(), 1);
    for (int r = 0; r < A.rows(); ++r) {
      double mu = A.row(r).mean();
      double var = (A.row(r).array() - mu).square().mean();
      double is = 1.0 / std::sqrt(var + eps);
      inv(r, 0) = is;
      xhat.row(r) = ((A.row(r).array() - mu) * is).matrix();
    }
    Mat y = xhat.array().rowwise() * G.row(0).array();
    y.rowwise() += Be.row(0);
    return push(std::move(y), needs(a) || needs(gamma) || needs(beta),
                [a, gamma, beta, xhat = std::move(xhat),
                 inv = std::move(inv)](Tape& t, const Mat& g) {
                  if (t.needs(gamma))
                    t.accum(gamma, g.cwiseProduct(xhat).colwise().sum());
                  if (t.needs(beta)) t.accum(beta, g.colwise().sum());
                  if (!t.needs(a)) return;
                  const Mat& G2 = t.val(gamma);
                  Mat d(g.rows(), g.cols());
                  double n = static_cast<double>(g.cols());
                  for (int r = 0; r < g.rows(); ++r) {
                    Eigen::RowVectorXd dxh =
                        g.row(r).cwiseProduct(G2.row(0));
                    double m1 = dxh.mean();
                    double m2 = dxh.cwiseProduct(xhat.row(r)).mean();
                    d.row(r) =
                        inv(r, 0) *
                        (dxh.array() - m1 - xhat.row(r).array() * m2)
                            .matrix();
                    (void)n;
                  }
                  t.accum(a, std::move(d));
                });
  }

  // 1-D convolution along the column axis, kernel width 3, zero padding.
  Var conv3_rows(Var a, Var kernel, Var bias) {
    const Mat& A = val(a);
    const Mat& K = val(kernel);
    const Mat& B = val(bias);
    if (K.rows() != 1 || K.cols() != 3)
      throw std::domain_error("conv3_rows: kernel must be 1x3");
    if (B.size() != 1) throw std::domain_error("conv3_rows: bias must be 1x1");
    int C = static_cast<int>(A.cols());
    Mat y(A.rows(), C);
    for (int k = 0; k < C; ++k) {
      y.col(k).setConstant(B(0, 0));
      if (k > 0) y.col(k) += K(0, 0) * A.col(k - 1);
      y.col(k) += K(0, 1) * A.col(k);
      if (k + 1 < C) y.col(k) += K(0, 2) * A.col(k + 1);
    }
    return push(std::move(y), needs(a) || needs(kernel) || needs(bias),
                [a, kernel, bias](Tape& t, const Mat& g) {
                  const Mat& A2 = t.val(a);
                  const Mat& K2 = t.val(kernel);
                  int C2 = static_cast<int>(A2.cols());
                  if (t.needs(a)) {
                    Mat d = Mat::Zero(A2.rows(), C2);
                    for (int k = 0; k < C2; ++k) {
                      if (k > 0) d.col(k - 1) += K2(0, 0) * g.col(k);
                      d.col(k) += K2(0, 1) * g.col(k);
                      if (k + 1 < C2) d.col(k + 1) += K2(0, 2) * g.col(k);
                    }
                    t.accum(a, std::move(d));
                  }
                  if (t.needs(kernel)) {
                    Mat dk = Mat::Zero(1, 3);
                    for (int k = 0; k < C2; ++k) {
                      if (k > 0) dk(0, 0) += g.col(k).dot(A2.col(k - 1));
                      dk(0, 1) += g.col(k).dot(A2.col(k));
                      if (k + 1 < C2) dk(0, 2) += g.col(k).dot(A2.col(k + 1));
                    }
                    t.accum(kernel, std::move(dk));
                  }
                  if (t.needs(bias)) {
                    Mat db(1, 1);
                    db(0, 0) = g.sum();
                    t.accum(bias, std::move(db));
                  }
                });
  }

  // Rows b*W..b*W+W-1 of the output hold x_b x_b^T for each batch row b.
  Var batched_gram(Var a) {
    const Mat& A = val(a);
    int B = static_cast<int>(A.rows());
    int W = static_cast<int>(A.cols());
    Mat y(B * W, W);
    for (int b = 0; b < B; ++b)
      y.middleRows(b * W, W) = A.row(b).transpose() * A.row(b);
    return push(std::move(y), needs(a), [a](Tape& t, const Mat& g) {
      if (!t.needs(a)) return;
      const Mat& A2 = t.val(a);
      int B2 = static_cast<int>(A2.rows());
      int W2 = static_cast<int>(A2.cols());
      Mat d(B2, W2);
      for (int b = 0; b < B2; ++b) {
        Mat gb = g.middleRows(b * W2, W2);
        d.row(b) = (A2.row(b) * (gb + gb.transpose()).transpose());
      }
      t.accum(a, std::move(d));
    });
  }

  // out(b, i) = sum_j M(b*W + i, j) * V(b, j)
  Var batched_apply(Var m, Var v) {
    const Mat& M = val(m);
    const Mat& V = val(v);
    int B = static_cast<int>(V.rows());
    int W = static_cast<int>(V.cols());
    if (M.rows() != static_cast<Eigen::Index>(B) * W || M.cols() != W)
      throw std::domain_error("batched_apply: shape mismatch");
    Mat y(B, W);
    for (int b = 0; b < B; ++b)
      y.row(b) = (M.middleRows(b * W, W) * V.row(b).transpose()).transpose();
    return push(std::move(y), needs(m) || needs(v),
                [m, v](Tape& t, const Mat& g) {
                  const Mat& M2 = t.val(m);
                  const Mat& V2 = t.val(v);
                  int B2 = static_cast<int>(V2.rows());
                  int W2 = static_cast<int>(V2.cols());
                  if (t.needs(m)) {
                    Mat dm(B2 * W2, W2);
                    for (int b = 0; b < B2; ++b)
                      dm.middleRows(b * W2, W2) =
                          g.row(b).transpose() * V2.row(b);
                    t.accum(m, std::move(dm));
                  }
                  if (t.needs(v)) {
                    Mat dv(B2, W2);
                    for (int b = 0; b < B2; ++b)
                      dv.row(b) = g.row(b) * M2.middleRows(b * W2, W2);
                    t.accum(v, std::move(dv));
                  }
                });
  }

  bool needs(Var x) const { return nodes_[check(x)].needs_grad; }

 private:
  struct Node {
    Mat value;
    Mat grad;
    bool needs_grad = false;
    std::function<void(Tape&, const Mat&)> back;
  };

  static constexpr double kSqrt2 = 1.4142135623730951;

  int check(Var x) const {
    if (x.idx < 0 || x.idx >= static_cast<int>(nodes_.size()))
      throw std::domain_error("tape: invalid variable handle");
    return x.idx;
  }

  void same_shape(Var a, Var b, const char* op) const {
    const Mat& u = nodes_[check(a)].value;
    const Mat& v = nodes_[check(b)].value;
    if (u.rows() != v.rows() || u.cols() != v.cols())
      throw std::domain_error(std::string("tape: shape mismatch in ") + op);
  }

  Var push(Mat value, bool needs_grad,
           std::function<void(Tape&, const Mat&)> back) {
    if (!value.allFinite())
      throw DivergenceError("tape: non-finite value produced");
    Node n;
    n.value = std::move(value);
    n.needs_grad = needs_grad;
    n.back = needs_grad ? std::move(back) : nullptr;
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
  }

  void accum(Var x, Mat g) {
    Node& n = nodes_[check(x)];
    if (n.grad.size() == 0)
      n.grad = std::move(g);
    else
      n.grad += g;
  }

  std::vector<Node> nodes_;
  mutable Mat grad_zero_;
};

using Var = Tape::Var;

}  // namespace jamshield::ad
