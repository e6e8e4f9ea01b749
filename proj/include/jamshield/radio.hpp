#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <string>
#include <vector>

#include "jamshield/common.hpp"
#include "jamshield/propagation.hpp"

namespace jamshield {

struct NoiseModel {
  double boltzmann = kBoltzmann;
  double temperature_k = 290.0;
  double noise_figure_linear = 1.0;

  void validate() const {
    if (temperature_k <= 0.0) throw ConfigError("noise.temperature_k must be > 0");
    if (noise_figure_linear < 1.0)
      throw ConfigError("noise.noise_figure must be >= 1");
  }
};

inline double noise_power(const NoiseModel& n, double bandwidth_hz) {
  if (bandwidth_hz <= 0.0)
    throw std::domain_error("noise_power: bandwidth must be > 0");
  return n.boltzmann * n.temperature_k * bandwidth_hz * n.noise_figure_linear;
}

enum class JamStrategy { kBarrage, kNarrowband, kSweep };

inline std::string to_string(JamStrategy s) {
  switch (s) {
    case JamStrategy::kBarrage: return "barrage";
    case JamStrategy::kNarrowband: return "narrowband";
    case JamStrategy::kSweep: return "sweep";
  }
  return "?";
}

inline JamStrategy jam_strategy_from_string(const std::string& s) {
  if (s == "barrage") return JamStrategy::kBarrage;
  if (s == "narrowband") return JamStrategy::kNarrowband;
  if (s == "sweep") return JamStrategy::kSweep;
  throw ConfigError("unknown jammer strategy '" + s + "'");
}

struct JammerConfig {
  Eigen::Vector3d position{300.0, 300.0, 1.5};
  double tx_power_dbm = 5.0;        // per occupied RB
  double antenna_gain_linear = 1.0;
  JamStrategy strategy = JamStrategy::kBarrage;
  int rb_span = 8;                  // narrowband / sweep window width in RBs
  int period_slots = 40;            // sweep period
  double center_hz = 0.0;           // narrowband park frequency; 0 = carrier center

  void validate() const {
    if (antenna_gain_linear <= 0.0)
      throw ConfigError("jammer.antenna_gain must be > 0");
    if (rb_span < 1) throw ConfigError("jammer.rb_span must be >= 1");
    if (period_slots < 1) throw ConfigError("jammer.period_slots must be >= 1");
    if (!std::isfinite(tx_power_dbm))
      throw ConfigError("jammer.tx_power_dbm must be finite");
  }
};

struct BwpConfig {
  int index = 0;
  double center_hz = 3.45e9;
  double bandwidth_hz = 100e6;
  int numerology = 2;
  int n_rb = 64;
  double slot_duration_s = 1e-3 / 4.0;

  double rb_bandwidth_hz() const {
    return 12.0 * 15e3 * static_cast<double>(1 << numerology);
  }

  // Center frequency of RB k within this part.
  double rb_center_hz(int k) const {
    return center_hz + (k - 0.5 * (n_rb - 1)) * rb_bandwidth_hz();
  }

  void validate() const {
    if (index != 0 && index != 1) throw ConfigError("bwp.index must be 0 or 1");
    if (index == 0 && (numerology != 2 || bandwidth_hz != 100e6))
      throw ConfigError("bwp 0 must use numerology 2 over 100 MHz");
    if (index == 1 && (numerology != 3 || bandwidth_hz != 50e6))
      throw ConfigError("bwp 1 must use numerology 3 over 50 MHz");
    if (n_rb < 1) throw ConfigError("bwp.n_rb must be >= 1");
    double want = 1e-3 / static_cast<double>(1 << numerology);
    if (std::abs(slot_duration_s - want) > 1e-12)
      throw ConfigError("bwp.slot_duration must equal 1e-3/2^mu");
  }
};

// Frequency extent shared by both parts; jammer windows live on this axis.
struct CarrierPlan {
  double lo_hz = 3.40e9;
  double hi_hz = 3.60e9;

  double span_hz() const { return hi_hz - lo_hz; }
  double center_hz() const { return 0.5 * (lo_hz + hi_hz); }

  void validate() const {
    if (hi_hz <= lo_hz) throw ConfigError("carrier.hi must exceed carrier.lo");
  }
};

// Frequency window a jammer occupies during one slot.
struct JamWindow {
  double lo_hz = 0.0;
  double hi_hz = 0.0;
};

inline JamWindow jam_window(const JammerConfig& j, const CarrierPlan& carrier,
                            double ref_rb_bandwidth_hz, int slot) {
  switch (j.strategy) {
    case JamStrategy::kBarrage:
      return {carrier.lo_hz, carrier.hi_hz};
    case JamStrategy::kNarrowband: {
      double w = j.rb_span * ref_rb_bandwidth_hz;
      double c = j.center_hz > 0.0 ? j.center_hz : carrier.center_hz();
      return {c - 0.5 * w, c + 0.5 * w};
    }
    case JamStrategy::kSweep: {
      double w = std::min(j.rb_span * ref_rb_bandwidth_hz, carrier.span_hz());
      int phase = slot % j.period_slots;
      double frac = j.period_slots > 1
                        ? static_cast<double>(phase) / (j.period_slots - 1)
                        : 0.0;
      double lo = carrier.lo_hz + frac * (carrier.span_hz() - w);
      return {lo, lo + w};
    }
  }
  return {0.0, 0.0};
}

// 1.0 for each RB of the part whose band overlaps the window.
inline Eigen::VectorXd jam_occupancy(const JamWindow& win, const BwpConfig& bwp) {
  Eigen::VectorXd mask = Eigen::VectorXd::Zero(bwp.n_rb);
  double half = 0.5 * bwp.rb_bandwidth_hz();
  for (int k = 0; k < bwp.n_rb; ++k) {
    double c = bwp.rb_center_hz(k);
    if (c - half < win.hi_hz && c + half > win.lo_hz) mask(k) = 1.0;
  }
  return mask;
}

struct PerRbRadioState {
  Eigen::VectorXd p_uav;     // W
  Eigen::VectorXd p_jam;     // W
  Eigen::VectorXd p_interf;  // W
  Eigen::VectorXd p_noise;   // W
  Eigen::VectorXd sinr;      // linear

  int n_rb() const { return static_cast<int>(p_uav.size()); }

  void check_shapes() const {
    auto n = p_uav.size();
    if (p_jam.size() != n || p_interf.size() != n || p_noise.size() != n)
      throw std::domain_error("PerRbRadioState: vector length mismatch");
  }
};

inline Eigen::VectorXd sinr_per_rb(const PerRbRadioState& s) {
  s.check_shapes();
  Eigen::VectorXd out(s.p_uav.size());
  for (int k = 0; k < s.p_uav.size(); ++k) {
    double den = s.p_jam(k) + s.p_interf(k) + s.p_noise(k);
    if (den <= 0.0) throw std::domain_error("sinr_per_rb: zero denominator");
    out(k) = s.p_uav(k) / den;
  }
  return out;
}

struct NotchVector {
  Eigen::VectorXd n;         // per-RB suppression in [0,1]
  double efficiency = 1.0;   // fraction of jam power removed where notched

  void validate() const {
    for (int k = 0; k < n.size(); ++k)
      if (!(n(k) >= 0.0 && n(k) <= 1.0))
        throw std::domain_error("notch entries must lie in [0,1]");
    if (!(efficiency >= 0.0 && efficiency <= 1.0))
      throw std::domain_error("notch efficiency must lie in [0,1]");
  }

  static NotchVector none(int n_rb, double efficiency = 1.0) {
    return {Eigen::VectorXd::Zero(n_rb), efficiency};
  }
};

// Window expansion of the (rb_start, rb_num, i_notch) triple. Out-of-range
// starts collapse to an empty window; spans are trimmed to the grid edge.
inline NotchVector expand_notch(int rb_start, int rb_num, int i_notch, int n_rb,
                                double efficiency) {
  NotchVector out = NotchVector::none(n_rb, efficiency);
  if (i_notch == 0 || rb_num <= 0) return out;
  if (rb_start < 0 || rb_start >= n_rb) return out;
  int count = std::min(rb_num, n_rb - rb_start);
  for (int k = rb_start; k < rb_start + count; ++k) out.n(k) = 1.0;
  return out;
}

inline Eigen::VectorXd apply_notching(const PerRbRadioState& s,
                                      const NotchVector& notch) {
  s.check_shapes();
  if (notch.n.size() != s.p_uav.size())
    throw std::domain_error("apply_notching: notch length mismatch");
  notch.validate();
  Eigen::VectorXd out(s.p_uav.size());
  for (int k = 0; k < s.p_uav.size(); ++k) {
    double nk = notch.n(k);
    double num = (1.0 - nk) * s.p_uav(k);
    double den = (1.0 - notch.efficiency * nk) * s.p_jam(k) + s.p_interf(k) +
                 s.p_noise(k);
    if (den <= 0.0) {
      out(k) = 0.0;
      continue;
    }
    out(k) = num / den;
  }
  return out;
}

struct Indicators {
  double rssi_w = 0.0;
  double rsrp_w = 0.0;
};

inline Indicators measure_indicators(const PerRbRadioState& s,
                                     const Eigen::VectorXd& ref_signal_powers) {
  s.check_shapes();
  if (ref_signal_powers.size() == 0)
    throw std::domain_error("measure_indicators: empty reference powers");
  Indicators ind;
  ind.rssi_w =
      (s.p_uav + s.p_jam + s.p_interf + s.p_noise).sum();
  ind.rsrp_w = ref_signal_powers.mean();
  return ind;
}

}  // namespace jamshield
