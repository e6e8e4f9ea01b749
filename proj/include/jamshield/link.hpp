#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "jamshield/common.hpp"
#include "jamshield/radio.hpp"

namespace jamshield {

struct EsmConfig {
  double beta_eesm = 2.0;
  double bler_sinr50_db = 1.0;
  double bler_slope = 1.0;  // per dB

  void validate() const {
    if (beta_eesm <= 0.0) throw ConfigError("esm.beta must be > 0");
    if (bler_slope <= 0.0) throw ConfigError("esm.bler_slope must be > 0");
  }
};

enum class PerMode { kAsWritten, kResidual };

struct HarqConfig {
  int r_max = 2;
  int r_max_limit = 4;
  PerMode mode = PerMode::kAsWritten;

  void validate() const {
    if (r_max_limit < 0) throw ConfigError("harq.r_max_limit must be >= 0");
    if (r_max < 0 || r_max > r_max_limit)
      throw ConfigError("harq.r_max must lie in [0, r_max_limit]");
  }
};

// Exponential effective-SINR mapping. Collapses the per-RB vector into one
// scalar that a single BLER curve can consume. Shifted by the minimum entry
// so the exponentials cannot all underflow on very strong links.
inline double effective_sinr(const Eigen::VectorXd& sinr, const EsmConfig& cfg) {
  if (sinr.size() == 0) throw std::domain_error("effective_sinr: empty vector");
  double lo = sinr(0);
  for (int k = 0; k < sinr.size(); ++k) {
    if (sinr(k) < 0.0) throw std::domain_error("effective_sinr: negative entry");
    lo = std::min(lo, sinr(k));
  }
  double acc = 0.0;
  for (int k = 0; k < sinr.size(); ++k)
    acc += std::exp(-(sinr(k) - lo) / cfg.beta_eesm);
  return lo - cfg.beta_eesm * std::log(acc / static_cast<double>(sinr.size()));
}

inline double sinr_to_bler(double sinr_eff, const EsmConfig& cfg) {
  if (sinr_eff < 0.0) throw std::domain_error("sinr_to_bler: negative SINR");
  if (sinr_eff == 0.0) return 1.0;
  double sinr_db = linear_to_db(sinr_eff);
  double z = cfg.bler_slope * (sinr_db - cfg.bler_sinr50_db);
  // guard exp overflow far from the knee
  if (z > 700.0) return 0.0;
  if (z < -700.0) return 1.0;
  return 1.0 / (1.0 + std::exp(z));
}

// Closed-form packet error after r retransmissions, in both readings of the
// formula. `kAsWritten` reproduces the printed form 1-(1-BLER)^(r+1), which
// grows with r; `kResidual` is BLER^(r+1), the probability every attempt fails.
inline double per_closed_form(double bler, int r, PerMode mode) {
  if (!(bler >= 0.0 && bler <= 1.0))
    throw std::domain_error("per_closed_form: bler outside [0,1]");
  if (r < 0) throw std::domain_error("per_closed_form: negative r");
  double p = static_cast<double>(r) + 1.0;
  if (mode == PerMode::kAsWritten) return 1.0 - std::pow(1.0 - bler, p);
  return std::pow(bler, p);
}

struct HarqOutcome {
  bool delivered = false;
  int attempts = 0;
};

inline HarqOutcome harq_episode(double bler, const HarqConfig& harq, Rng& rng) {
  harq.validate();
  if (!(bler >= 0.0 && bler <= 1.0))
    throw std::domain_error("harq_episode: bler outside [0,1]");
  HarqOutcome out;
  int max_attempts = harq.r_max + 1;
  for (int a = 1; a <= max_attempts; ++a) {
    out.attempts = a;
    if (rng.uniform() >= bler) {
      out.delivered = true;
      return out;
    }
  }
  out.delivered = false;
  return out;
}

struct TimingState {
  double last_latency_s = 0.0;
  bool has_last = false;
  long long num_samples = 0;
  double latency_sum_s = 0.0;
  double jitter_s = 0.0;  // running mean of |latency_t - latency_{t-1}|
  long long jitter_samples = 0;

  double mean_latency_s() const {
    return num_samples > 0 ? latency_sum_s / num_samples : 0.0;
  }
};

// `attempts` may be fractional when averaging a batch of packets.
inline TimingState update_timing(double attempts, const BwpConfig& bwp,
                                 double reconf_penalty_s, TimingState t) {
  if (attempts < 1) throw std::domain_error("update_timing: attempts must be >= 1");
  if (reconf_penalty_s < 0.0)
    throw std::domain_error("update_timing: negative penalty");
  double latency = attempts * bwp.slot_duration_s + reconf_penalty_s;
  if (t.has_last) {
    double d = std::abs(latency - t.last_latency_s);
    t.jitter_samples += 1;
    t.jitter_s += (d - t.jitter_s) / static_cast<double>(t.jitter_samples);
  }
  t.last_latency_s = latency;
  t.has_last = true;
  t.num_samples += 1;
  t.latency_sum_s += latency;
  return t;
}

}  // namespace jamshield
