#pragma once

#include <string>
#include <vector>

#include "jamshield/autodiff.hpp"
#include "jamshield/common.hpp"

namespace jamshield::nn {

using Mat = Eigen::MatrixXd;

struct Param {
  std::string name;
  Mat value;
};

class ParamStore {
 public:
  int add(std::string name, Mat init) {
    for (const auto& p : params_)
      if (p.name == name)
        throw ConfigError("duplicate parameter name '" + name + "'");
    params_.push_back({std::move(name), std::move(init)});
    return static_cast<int>(params_.size()) - 1;
  }

  Param& at(int i) { return params_.at(i); }
  const Param& at(int i) const { return params_.at(i); }
  size_t count() const { return params_.size(); }

  size_t scalar_count() const {
    size_t n = 0;
    for (const auto& p : params_) n += p.value.size();
    return n;
  }

 private:
  std::vector<Param> params_;
};

// One tape registration of every parameter, used for a single loss build.
struct TapeBinding {
  std::vector<ad::Var> vars;
  ad::Var operator[](int param_idx) const { return vars.at(param_idx); }
};

inline TapeBinding bind(ad::Tape& t, const ParamStore& ps) {
  TapeBinding b;
  b.vars.reserve(ps.count());
  for (size_t i = 0; i < ps.count(); ++i)
    b.vars.push_back(t.input(ps.at(static_cast<int>(i)).value, true));
  return b;
}

inline std::vector<Mat> collect_grads(const ad::Tape& t, const TapeBinding& b) {
  std::vector<Mat> g;
  g.reserve(b.vars.size());
  for (ad::Var v : b.vars) g.push_back(t.grad(v));
  return g;
}

inline double global_grad_norm(const std::vector<Mat>& grads) {
  double s = 0.0;
  for (const auto& g : grads) s += g.squaredNorm();
  return std::sqrt(s);
}

inline void clip_grads(std::vector<Mat>& grads, double max_norm) {
  if (max_norm <= 0.0) return;
  double n = global_grad_norm(grads);
  if (n > max_norm) {
    double s = max_norm / n;
    for (auto& g : grads) g *= s;
  }
}

class Adam {
 public:
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  explicit Adam(const ParamStore& ps) {
    m_.reserve(ps.count());
    v_.reserve(ps.count());
    for (size_t i = 0; i < ps.count(); ++i) {
      const Mat& val = ps.at(static_cast<int>(i)).value;
      m_.push_back(Mat::Zero(val.rows(), val.cols()));
      v_.push_back(Mat::Zero(val.rows(), val.cols()));
    }
  }

  void step(ParamStore& ps, const std::vector<Mat>& grads, double lr) {
    if (grads.size() != m_.size())
      throw std::domain_error("adam: gradient count mismatch");
    ++t_;
    double bc1 = 1.0 - std::pow(beta1, t_);
    double bc2 = 1.0 - std::pow(beta2, t_);
    for (size_t i = 0; i < grads.size(); ++i) {
      const Mat& g = grads[i];
      if (!g.allFinite()) throw DivergenceError("adam: non-finite gradient");
      m_[i] = beta1 * m_[i] + (1.0 - beta1) * g;
      v_[i] = beta2 * v_[i] + (1.0 - beta2) * g.cwiseProduct(g);
      Mat mhat = m_[i] / bc1;
      Mat vhat = v_[i] / bc2;
      ps.at(static_cast<int>(i)).value -=
          lr * mhat.cwiseQuotient((vhat.cwiseSqrt().array() + eps).matrix());
    }
  }

 private:
  std::vector<Mat> m_, v_;
  long long t_ = 0;
};

inline Mat xavier_uniform(int rows, int cols, Rng& rng, double gain = 1.0) {
  double bound = gain * std::sqrt(6.0 / static_cast<double>(rows + cols));
  Mat w(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) w(r, c) = rng.uniform(-bound, bound);
  return w;
}

struct MlpSpec {
  std::vector<int> widths;  // input, hidden..., output

  void validate() const {
    if (widths.size() < 2) throw ConfigError("mlp needs >= 2 layer widths");
    for (int w : widths)
      if (w < 1) throw ConfigError("mlp widths must be >= 1");
  }
};

// Affine stack with tanh hidden activations and a linear output layer.
class Mlp {
 public:
  static Mlp create(ParamStore& ps, const std::string& prefix,
                    const MlpSpec& spec, Rng& rng, double out_gain = 1.0) {
    spec.validate();
    Mlp m;
    m.spec_ = spec;
    for (size_t i = 0; i + 1 < spec.widths.size(); ++i) {
      bool last = i + 2 == spec.widths.size();
      int in = spec.widths[i];
      int out = spec.widths[i + 1];
      double gain = last ? out_gain : 1.0;
      m.w_.push_back(ps.add(prefix + ".w" + std::to_string(i),
                            xavier_uniform(in, out, rng, gain)));
      m.b_.push_back(
          ps.add(prefix + ".b" + std::to_string(i), Mat::Zero(1, out)));
    }
    return m;
  }

  ad::Var forward(ad::Tape& t, const TapeBinding& b, ad::Var x) const {
    ad::Var h = x;
    for (size_t i = 0; i < w_.size(); ++i) {
      h = t.add_rowvec(t.matmul(h, b[w_[i]]), b[b_[i]]);
      if (i + 1 < w_.size()) h = t.tanh_(h);
    }
    return h;
  }

  const MlpSpec& spec() const { return spec_; }
  int input_dim() const { return spec_.widths.front(); }
  int output_dim() const { return spec_.widths.back(); }
  const std::vector<int>& weight_ids() const { return w_; }
  const std::vector<int>& bias_ids() const { return b_; }

 private:
  MlpSpec spec_;
  std::vector<int> w_, b_;
};

// Learning-rate decay from start to end along a geometric path.
inline double geometric_lr(double start, double end, int t, int total) {
  if (total <= 1) return end;
  double frac = clamp(static_cast<double>(t) / (total - 1), 0.0, 1.0);
  return start * std::pow(end / start, frac);
}

// Batch size doubling from start to end on an even milestone grid.
inline int batch_size_at(int start, int end, int t, int total) {
  if (start >= end) return start;
  int steps = 0;
  while ((start << (steps + 1)) <= end) ++steps;
  double frac = total > 0 ? clamp(static_cast<double>(t) / total, 0.0, 1.0) : 1.0;
  int k = std::min(steps, static_cast<int>(frac * (steps + 1)));
  return start << k;
}

}  // namespace jamshield::nn
