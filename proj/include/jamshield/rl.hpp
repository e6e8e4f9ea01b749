#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "jamshield/common.hpp"

namespace jamshield::rl {

struct GaeResult {
  Eigen::VectorXd advantages;
  Eigen::VectorXd returns;
};

// Exponentially weighted advantage estimate over one episode.
inline GaeResult compute_gae(const Eigen::VectorXd& rewards,
                             const Eigen::VectorXd& values,
                             double terminal_value, double gamma,
                             double lambda) {
  const int n = static_cast<int>(rewards.size());
  if (values.size() != n)
    throw std::domain_error("compute_gae: length mismatch");
  GaeResult out;
  out.advantages.resize(n);
  out.returns.resize(n);
  double acc = 0.0;
  for (int t = n - 1; t >= 0; --t) {
    double v_next = (t + 1 < n) ? values(t + 1) : terminal_value;
    double delta = rewards(t) + gamma * v_next - values(t);
    acc = delta + gamma * lambda * acc;
    out.advantages(t) = acc;
    out.returns(t) = acc + values(t);
  }
  return out;
}

inline double ppo_clip_objective(double rho, double adv, double eps) {
  if (rho <= 0.0) throw std::domain_error("ppo_clip_objective: rho must be > 0");
  double clipped = clamp(rho, 1.0 - eps, 1.0 + eps);
  return std::min(rho * adv, clipped * adv);
}

inline double kl_categorical(const Eigen::VectorXd& p,
                             const Eigen::VectorXd& q) {
  if (p.size() != q.size())
    throw std::domain_error("kl_categorical: support mismatch");
  double kl = 0.0;
  for (int i = 0; i < p.size(); ++i) {
    if (p(i) < 0.0 || q(i) < 0.0)
      throw std::domain_error("kl_categorical: negative probability");
    if (p(i) == 0.0) continue;
    if (q(i) == 0.0) return std::numeric_limits<double>::infinity();
    kl += p(i) * std::log(p(i) / q(i));
  }
  return kl;
}

inline double kl_diag_gaussian(const Eigen::VectorXd& mu1,
                               const Eigen::VectorXd& sig1,
                               const Eigen::VectorXd& mu2,
                               const Eigen::VectorXd& sig2) {
  if (mu1.size() != mu2.size() || sig1.size() != sig2.size() ||
      mu1.size() != sig1.size())
    throw std::domain_error("kl_diag_gaussian: dimension mismatch");
  double kl = 0.0;
  for (int i = 0; i < mu1.size(); ++i) {
    if (sig1(i) <= 0.0 || sig2(i) <= 0.0)
      throw std::domain_error("kl_diag_gaussian: non-positive sigma");
    double r = sig1(i) / sig2(i);
    double md = (mu1(i) - mu2(i)) / sig2(i);
    kl += std::log(sig2(i) / sig1(i)) + 0.5 * (r * r + md * md - 1.0);
  }
  return kl;
}

inline double categorical_entropy(const Eigen::VectorXd& p) {
  double h = 0.0;
  for (int i = 0; i < p.size(); ++i) {
    if (p(i) < 0.0)
      throw std::domain_error("categorical_entropy: negative probability");
    if (p(i) > 0.0) h -= p(i) * std::log(p(i));
  }
  return h;
}

// Streaming mean/variance used to keep critic targets well-scaled.
class RunningMeanStd {
 public:
  void update(double x) {
    ++n_;
    double d = x - mean_;
    mean_ += d / static_cast<double>(n_);
    m2_ += d * (x - mean_);
  }

  void update_batch(const Eigen::VectorXd& xs) {
    for (int i = 0; i < xs.size(); ++i) update(xs(i));
  }

  long long count() const { return n_; }
  double mean() const { return mean_; }

  double variance() const {
    return n_ > 1 ? m2_ / static_cast<double>(n_) : 1.0;
  }

  double stddev() const { return std::sqrt(std::max(variance(), 1e-8)); }

  double normalize(double x) const { return (x - mean_) / stddev(); }
  double denormalize(double z) const { return z * stddev() + mean_; }

 private:
  long long n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

inline void standardize(Eigen::VectorXd& v) {
  if (v.size() == 0) return;
  double mean = v.mean();
  double var = (v.array() - mean).square().sum() / v.size();
  double sd = std::sqrt(std::max(var, 1e-12));
  v = ((v.array() - mean) / sd).matrix();
}

}  // namespace jamshield::rl
