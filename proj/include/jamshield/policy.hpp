#pragma once

#include <string>
#include <vector>

#include "jamshield/autodiff.hpp"
#include "jamshield/common.hpp"
#include "jamshield/nn.hpp"

namespace jamshield::policy {

using Mat = Eigen::MatrixXd;

constexpr double kLogStdMin = -5.0;
constexpr double kLogStdMax = 2.0;
constexpr double kSquashEps = 1e-6;
constexpr double kLog2Pi = 1.8378770664093453;

struct HeadSpec {
  std::vector<int> cat_sizes;
  int cont_dim = 0;

  int total_outputs() const {
    int n = cont_dim;
    for (int k : cat_sizes) n += k;
    return n;
  }

  void validate() const {
    for (int k : cat_sizes)
      if (k < 2) throw ConfigError("categorical head needs >= 2 classes");
    if (cont_dim < 0) throw ConfigError("cont_dim must be >= 0");
    if (cat_sizes.empty() && cont_dim == 0)
      throw ConfigError("policy head has no outputs");
  }
};

struct ActorNet {
  nn::Mlp trunk;  // [obs, hidden..., total_outputs]
  HeadSpec heads;
  int log_std_param = -1;

  static ActorNet create(nn::ParamStore& ps, const std::string& prefix,
                         int obs_dim, const std::vector<int>& hidden,
                         const HeadSpec& heads, Rng& rng,
                         double log_std_init = -0.5) {
    heads.validate();
    ActorNet net;
    net.heads = heads;
    nn::MlpSpec spec;
    spec.widths.push_back(obs_dim);
    for (int h : hidden) spec.widths.push_back(h);
    spec.widths.push_back(heads.total_outputs());
    net.trunk = nn::Mlp::create(ps, prefix, spec, rng, 0.01);
    if (heads.cont_dim > 0)
      net.log_std_param = ps.add(prefix + ".log_std",
                                 Mat::Constant(1, heads.cont_dim, log_std_init));
    return net;
  }
};

// Plain rollout-time forward; one observation row through the affine stack.
inline Eigen::RowVectorXd mlp_forward_row(const nn::ParamStore& ps,
                                          const nn::Mlp& mlp,
                                          Eigen::RowVectorXd h) {
  const auto& ws = mlp.weight_ids();
  const auto& bs = mlp.bias_ids();
  for (size_t i = 0; i < ws.size(); ++i) {
    h = h * ps.at(ws[i]).value + ps.at(bs[i]).value;
    if (i + 1 < ws.size()) h = h.array().tanh();
  }
  return h;
}

inline Eigen::RowVectorXd clipped_log_std(const nn::ParamStore& ps,
                                          const ActorNet& net) {
  if (net.log_std_param < 0) return Eigen::RowVectorXd();
  return ps.at(net.log_std_param)
      .value.row(0)
      .cwiseMax(kLogStdMin)
      .cwiseMin(kLogStdMax);
}

struct ActionSample {
  std::vector<int> cats;
  Eigen::VectorXd pre_squash;
  Eigen::VectorXd squashed;
};

inline int sample_categorical(const Eigen::RowVectorXd& logits, Rng& rng) {
  Eigen::ArrayXd e = (logits.array() - logits.maxCoeff()).exp();
  Eigen::ArrayXd p = e / e.sum();
  double u = rng.uniform();
  double acc = 0.0;
  for (int i = 0; i < p.size(); ++i) {
    acc += p(i);
    if (u < acc) return i;
  }
  return static_cast<int>(p.size()) - 1;
}

inline ActionSample sample_action(const ActorNet& net,
                                  const nn::ParamStore& ps,
                                  const Eigen::RowVectorXd& obs, Rng& rng,
                                  bool deterministic = false) {
  Eigen::RowVectorXd out = mlp_forward_row(ps, net.trunk, obs);
  ActionSample s;
  int off = 0;
  for (int k : net.heads.cat_sizes) {
    Eigen::RowVectorXd logits = out.segment(off, k);
    int a;
    if (deterministic) {
      logits.maxCoeff(&a);
    } else {
      a = sample_categorical(logits, rng);
    }
    s.cats.push_back(a);
    off += k;
  }
  if (net.heads.cont_dim > 0) {
    Eigen::RowVectorXd mean = out.segment(off, net.heads.cont_dim);
    Eigen::RowVectorXd ls = clipped_log_std(ps, net);
    s.pre_squash.resize(net.heads.cont_dim);
    for (int d = 0; d < net.heads.cont_dim; ++d) {
      double z = deterministic ? 0.0 : rng.normal();
      s.pre_squash(d) = mean(d) + std::exp(ls(d)) * z;
    }
    s.squashed = s.pre_squash.array().tanh();
  }
  return s;
}

struct LogpEntropy {
  ad::Var logp;     // B x 1
  ad::Var entropy;  // B x 1
  std::vector<ad::Var> cat_logits;  // per head, B x K
  ad::Var cont_mean;                // B x C when cont_dim > 0
  ad::Var cont_log_std;             // 1 x C clipped
};

// Rebuilds the joint log-probability of recorded actions on the tape, so the
// PPO ratio and its gradient flow through every head.
inline LogpEntropy logp_entropy(ad::Tape& t, const nn::TapeBinding& b,
                                const ActorNet& net, ad::Var obs,
                                const std::vector<std::vector<int>>& cat_actions,
                                const Mat& pre_squash) {
  const int rows = static_cast<int>(t.val(obs).rows());
  ad::Var out = net.trunk.forward(t, b, obs);
  LogpEntropy r;
  ad::Var logp = t.input(Mat::Zero(rows, 1));
  ad::Var ent = t.input(Mat::Zero(rows, 1));
  int off = 0;
  if (cat_actions.size() != net.heads.cat_sizes.size())
    throw std::domain_error("logp_entropy: categorical head count mismatch");
  for (size_t h = 0; h < net.heads.cat_sizes.size(); ++h) {
    int k = net.heads.cat_sizes[h];
    ad::Var logits = t.slice_cols(out, off, k);
    r.cat_logits.push_back(logits);
    ad::Var lse = t.logsumexp_rows(logits);
    ad::Var sel = t.select_cols(logits, cat_actions[h]);
    logp = t.add(logp, t.sub(sel, lse));
    ad::Var sm = t.softmax_rows(logits);
    ad::Var px = t.rowsum(t.mul(sm, logits));
    ent = t.add(ent, t.sub(lse, px));
    off += k;
  }
  if (net.heads.cont_dim > 0) {
    const int c = net.heads.cont_dim;
    if (pre_squash.rows() != rows || pre_squash.cols() != c)
      throw std::domain_error("logp_entropy: pre_squash shape mismatch");
    ad::Var mean = t.slice_cols(out, off, c);
    r.cont_mean = mean;
    ad::Var ls = t.clip_const(b[net.log_std_param], kLogStdMin, kLogStdMax);
    r.cont_log_std = ls;
    ad::Var inv_std = t.exp_(t.scale(ls, -1.0));
    ad::Var acts = t.input(pre_squash);
    ad::Var z = t.mul_rowvec(t.sub(acts, mean), inv_std);
    ad::Var quad = t.scale(t.rowsum(t.mul(z, z)), -0.5);
    ad::Var sum_ls = t.sum_all(ls);
    ad::Var lp = t.add_scalar_var(quad, sum_ls, -1.0);
    lp = t.add_const(lp, -0.5 * c * kLog2Pi);
    Mat corr(rows, 1);
    for (int rr = 0; rr < rows; ++rr) {
      double s = 0.0;
      for (int d = 0; d < c; ++d) {
        double y = std::tanh(pre_squash(rr, d));
        s += std::log(1.0 - y * y + kSquashEps);
      }
      corr(rr, 0) = s;
    }
    lp = t.sub(lp, t.input(corr));
    logp = t.add(logp, lp);
    ad::Var ec = t.add_scalar_var(t.input(Mat::Zero(rows, 1)), sum_ls, 1.0);
    ec = t.add_const(ec, 0.5 * c * (1.0 + kLog2Pi));
    ent = t.add(ent, ec);
  }
  r.logp = logp;
  r.entropy = ent;
  return r;
}

// Sum of exact KLs over head pairs that share a support; pairs that do not
// match contribute nothing. Returns a B x 1 variable.
inline ad::Var kl_matched_heads(ad::Tape& t, const LogpEntropy& a,
                                const LogpEntropy& b, const HeadSpec& ha,
                                const HeadSpec& hb) {
  int rows = 0;
  if (!a.cat_logits.empty())
    rows = static_cast<int>(t.val(a.cat_logits[0]).rows());
  else if (a.cont_mean.valid())
    rows = static_cast<int>(t.val(a.cont_mean).rows());
  ad::Var total = t.input(Mat::Zero(std::max(rows, 1), 1));
  size_t pairs = std::min(ha.cat_sizes.size(), hb.cat_sizes.size());
  for (size_t h = 0; h < pairs; ++h) {
    if (ha.cat_sizes[h] != hb.cat_sizes[h]) continue;
    ad::Var la = a.cat_logits[h];
    ad::Var lb = b.cat_logits[h];
    ad::Var logp = t.add_colvec(la, t.scale(t.logsumexp_rows(la), -1.0));
    ad::Var logq = t.add_colvec(lb, t.scale(t.logsumexp_rows(lb), -1.0));
    ad::Var p = t.softmax_rows(la);
    total = t.add(total, t.rowsum(t.mul(p, t.sub(logp, logq))));
  }
  if (ha.cont_dim > 0 && ha.cont_dim == hb.cont_dim && a.cont_mean.valid() &&
      b.cont_mean.valid()) {
    int c = ha.cont_dim;
    ad::Var ls1 = a.cont_log_std;
    ad::Var ls2 = b.cont_log_std;
    ad::Var var1 = t.exp_(t.scale(ls1, 2.0));
    ad::Var inv_var2 = t.exp_(t.scale(ls2, -2.0));
    ad::Var diff = t.sub(a.cont_mean, b.cont_mean);
    ad::Var num = t.add_rowvec(t.mul(diff, diff), var1);
    ad::Var frac = t.scale(t.rowsum(t.mul_rowvec(num, inv_var2)), 0.5);
    ad::Var ls_gap = t.sum_all(t.sub(ls2, ls1));
    ad::Var kl = t.add_scalar_var(frac, ls_gap, 1.0);
    kl = t.add_const(kl, -0.5 * c);
    total = t.add(total, kl);
  }
  return total;
}

}  // namespace jamshield::policy
