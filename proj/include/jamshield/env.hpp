#pragma once

#include <Eigen/Dense>
#include <array>
#include <initializer_list>
#include <optional>
#include <string>
#include <vector>

#include "jamshield/common.hpp"
#include "jamshield/link.hpp"
#include "jamshield/radio.hpp"
#include "jamshield/scenario.hpp"

namespace jamshield {

struct RewardWeights {
  double a1_delivery = 0.4, a1_sinr = 0.2, a1_latency = 0.2, a1_jitter = 0.2;
  double a2_delivery = 0.4, a2_sinr = 0.4, a2_rsrp = 0.2;

  void validate() const {
    double w1 = a1_delivery + a1_sinr + a1_latency + a1_jitter;
    double w2 = a2_delivery + a2_sinr + a2_rsrp;
    for (double w : {a1_delivery, a1_sinr, a1_latency, a1_jitter, a2_delivery,
                     a2_sinr, a2_rsrp})
      if (w < 0) throw ConfigError("reward weights must be >= 0");
    if (std::abs(w1 - 1.0) > 1e-9 || std::abs(w2 - 1.0) > 1e-9)
      throw ConfigError("per-agent reward weights must sum to 1");
  }
};

struct NormalizedMetrics {
  double delivery = 0.0;
  double sinr = 0.0;
  double rssi = 0.0;
  double rsrp = 0.0;
  double latency = 0.0;
  double jitter = 0.0;
};

inline std::pair<double, double> compute_rewards(const NormalizedMetrics& m,
                                                 const RewardWeights& w) {
  for (double v : {m.delivery, m.sinr, m.rsrp, m.latency, m.jitter})
    if (!(v >= 0.0 && v <= 1.0))
      throw std::domain_error("compute_rewards: metric outside [0,1]");
  double s1 = w.a1_delivery * m.delivery + w.a1_sinr * m.sinr +
              w.a1_latency * m.latency + w.a1_jitter * m.jitter;
  double s2 = w.a2_delivery * m.delivery + w.a2_sinr * m.sinr +
              w.a2_rsrp * m.rsrp;
  return {clamp(2.0 * s1 - 1.0, -1.0, 1.0), clamp(2.0 * s2 - 1.0, -1.0, 1.0)};
}

// Running min/max normalizer seeded with a prior range, so the first sample
// already lands in [0,1]. Latency-like metrics report 1 - ratio.
class NormalizationTracker {
 public:
  NormalizationTracker(double prior_min, double prior_max, bool inverted)
      : min_(prior_min), max_(prior_max), inverted_(inverted) {
    if (!(prior_min < prior_max))
      throw ConfigError("tracker prior range must be non-empty");
  }

  double normalize(double value) {
    min_ = std::min(min_, value);
    max_ = std::max(max_, value);
    double span = max_ - min_;
    double ratio = span > 0.0 ? (value - min_) / span : 0.0;
    ratio = clamp(ratio, 0.0, 1.0);
    return inverted_ ? 1.0 - ratio : ratio;
  }

  double min_seen() const { return min_; }
  double max_seen() const { return max_; }

 private:
  double min_, max_;
  bool inverted_;
};

struct ObjectiveWeights {
  double phi = 1.0;    // packet loss
  double beta = 0.25;  // retransmission count
  double mu = 0.5;     // latency
  double psi = 0.25;   // jitter
  double c_min = 0.0;
  double c_max = std::numeric_limits<double>::infinity();
  double l_max_s = 0.020;
  double j_max_s = 0.010;
  int n_notch_max = 16;

  void validate() const {
    for (double w : {phi, beta, mu, psi})
      if (w < 0) throw ConfigError("objective weights must be >= 0");
  }
};

struct KpiRecord {
  int slot = 0;
  double packet_loss = 0.0;
  double attempts = 1.0;
  double latency_s = 0.0;
  double jitter_s = 0.0;
  double sinr_eff = 0.0;  // linear
  double rssi_w = 0.0;
  double rsrp_w = 0.0;
  double r1 = 0.0;
  double r2 = 0.0;
  double l1 = 0.0;
  double l2 = 0.0;
};

struct EvalObjectiveResult {
  double value = 0.0;
  bool latency_ok = true;
  bool jitter_ok = true;
  bool notch_ok = true;
};

inline EvalObjectiveResult eval_objective(const std::vector<KpiRecord>& kpis,
                                          const ObjectiveWeights& w,
                                          double mean_notch_rbs = 0.0) {
  if (kpis.empty()) throw std::domain_error("eval_objective: empty KPI list");
  w.validate();
  double pl = 0, ra = 0, lat = 0, jit = 0;
  for (const auto& k : kpis) {
    pl += k.packet_loss;
    ra += k.attempts;
    lat += k.latency_s;
    jit += k.jitter_s;
  }
  double n = static_cast<double>(kpis.size());
  pl /= n;
  ra /= n;
  lat /= n;
  jit /= n;
  EvalObjectiveResult r;
  r.value = w.phi * pl + w.beta * ra + w.mu * lat + w.psi * jit;
  r.latency_ok = lat <= w.l_max_s;
  r.jitter_ok = jit <= w.j_max_s;
  r.notch_ok = mean_notch_rbs <= w.n_notch_max;
  return r;
}

struct RecoveryAction {
  int rb_start = 0;
  int rb_num = 0;
  int i_notch = 0;
  int bwp_idx = 0;
  int r_max = 0;
  BeamAngles beams;
};

struct JointActionRaw {
  // categorical picks: rb_start, rb_num, i_notch, bwp_idx, r_max
  std::array<int, 5> cats{0, 0, 0, 0, 0};
  Eigen::Vector4d cont{0, 0, 0, 0};  // squashed to (-1,1)
};

inline double angle_from_unit(double x, double span) {
  double u = 0.5 * (x + 1.0);
  double a = u * span;
  if (a >= span && span > kPi) a = std::fmod(a, span);
  return a;
}

inline RecoveryAction decode_joint_action(const JointActionRaw& raw,
                                          const ScenarioConfig& sc) {
  for (int d = 0; d < 4; ++d)
    if (!std::isfinite(raw.cont(d)))
      throw EpisodeError("decode_joint_action: non-finite beam output");
  RecoveryAction a;
  a.bwp_idx = clamp_int(raw.cats[3], 0, 1);
  a.i_notch = clamp_int(raw.cats[2], 0, 1);
  const int n_rb = sc.bwp(a.bwp_idx).n_rb;
  int raw_start = raw.cats[0];
  if (raw_start < 0 || raw_start >= n_rb) {
    a.rb_start = clamp_int(raw_start, 0, n_rb - 1);
    a.rb_num = 0;
  } else {
    a.rb_start = raw_start;
    a.rb_num = clamp_int(raw.cats[1], 0,
                         std::min(sc.notch_max, n_rb - a.rb_start));
  }
  a.r_max = clamp_int(raw.cats[4], 0, sc.r_max_limit);
  a.beams.theta_uav = angle_from_unit(raw.cont(0), kPi);
  a.beams.phi_uav = angle_from_unit(raw.cont(1), 2.0 * kPi);
  a.beams.theta_gnb = angle_from_unit(raw.cont(2), kPi);
  a.beams.phi_gnb = angle_from_unit(raw.cont(3), 2.0 * kPi);
  return a;
}

// Anything able to score a (rssi, sinr) window; the detector plugs in here.
class LogitSource {
 public:
  virtual ~LogitSource() = default;
  virtual std::pair<double, double> score(
      const std::vector<double>& rssi_dbm,
      const std::vector<double>& sinr_db) const = 0;
  virtual int window_len() const = 0;
};

struct AgentObs {
  Eigen::VectorXd a1;
  Eigen::VectorXd a2;
};

struct StepResult {
  AgentObs obs;
  double r1 = 0.0;
  double r2 = 0.0;
  KpiRecord kpi;
  bool done = false;
};

inline double safe_db(double linear, double floor_db = -60.0) {
  if (linear <= 0.0) return floor_db;
  return std::max(linear_to_db(linear), floor_db);
}

class JammingEnv {
 public:
  JammingEnv(ScenarioConfig sc, RewardWeights rw = {},
             const LogitSource* detector = nullptr)
      : sc_(std::move(sc)), rw_(rw), detector_(detector) {
    sc_.validate();
    rw_.validate();
  }

  int obs_dim() const { return detector_ ? 5 : 3; }
  const ScenarioConfig& scenario() const { return sc_; }

  AgentObs reset(std::uint64_t seed) {
    rng_ = Rng(seed);
    ep_ = draw_episode(sc_, rng_);
    slot_ = 0;
    active_ = true;
    timing_ = TimingState{};
    prev_.reset();
    kpis_.clear();
    notch_rb_sum_ = 0.0;
    rssi_win_.clear();
    sinr_win_.clear();
    trackers_ = Trackers{};
    return neutral_obs();
  }

  bool active() const { return active_; }
  const std::vector<KpiRecord>& kpis() const { return kpis_; }
  double mean_notch_rbs() const {
    return slot_ > 0 ? notch_rb_sum_ / slot_ : 0.0;
  }
  const EpisodeRealization& realization() const { return ep_; }

  StepResult step(const JointActionRaw& raw) {
    if (!active_) throw EpisodeError("step: episode not active");
    RecoveryAction act = decode_joint_action(raw, sc_);

    double penalty = 0.0;
    if (prev_) {
      if (act.bwp_idx != prev_->bwp_idx) penalty += sc_.penalties.bwp_switch_s;
      if (beam_moved(prev_->beams, act.beams))
        penalty += sc_.penalties.beam_update_s;
      if (notch_changed(*prev_, act)) penalty += sc_.penalties.notch_update_s;
    }

    const BwpConfig& bwp = sc_.bwp(act.bwp_idx);
    PerRbRadioState st =
        assemble_per_rb_powers(sc_, ep_, act.bwp_idx, act.beams, slot_);

    Eigen::VectorXd ref = st.p_uav / 12.0;  // one reference RE of the 12 per RB
    Indicators ind = measure_indicators(st, ref);

    NotchVector notch = expand_notch(act.rb_start, act.rb_num, act.i_notch,
                                     bwp.n_rb, sc_.notch_efficiency);
    notch_rb_sum_ += notch.n.sum();
    Eigen::VectorXd notched = apply_notching(st, notch);

    std::vector<double> data;
    data.reserve(bwp.n_rb);
    for (int k = 0; k < bwp.n_rb; ++k)
      if (notch.n(k) < 1.0) data.push_back(notched(k));
    double sinr_eff = 0.0;
    double bler = 1.0;
    if (!data.empty()) {
      Eigen::VectorXd dv =
          Eigen::Map<Eigen::VectorXd>(data.data(), data.size());
      sinr_eff = effective_sinr(dv, sc_.esm);
      bler = sinr_to_bler(sinr_eff, sc_.esm);
    }

    HarqConfig hc{act.r_max, sc_.r_max_limit, sc_.per_mode};
    int delivered = 0;
    int attempts_total = 0;
    for (int p = 0; p < sc_.packets_per_slot; ++p) {
      HarqOutcome o = harq_episode(bler, hc, rng_);
      delivered += o.delivered ? 1 : 0;
      attempts_total += o.attempts;
    }
    double packet_loss =
        1.0 - static_cast<double>(delivered) / sc_.packets_per_slot;
    double mean_attempts =
        static_cast<double>(attempts_total) / sc_.packets_per_slot;

    timing_ = update_timing(mean_attempts, bwp, penalty, timing_);
    double latency = timing_.last_latency_s;
    double jitter = timing_.jitter_s;

    double rssi_dbm = watts_to_dbm(ind.rssi_w);
    double sinr_db = safe_db(sinr_eff);
    std::pair<double, double> logits{0.0, 0.0};
    if (detector_) {
      push_window(rssi_dbm, sinr_db);
      logits = detector_->score(rssi_win_, sinr_win_);
    }

    NormalizedMetrics m;
    m.delivery = 1.0 - trackers_.loss.normalize(packet_loss);
    m.sinr = trackers_.sinr_db.normalize(sinr_db);
    m.rssi = trackers_.rssi_dbm.normalize(rssi_dbm);
    m.rsrp = trackers_.rsrp_dbm.normalize(safe_dbm(ind.rsrp_w));
    m.latency = trackers_.latency.normalize(latency);
    m.jitter = trackers_.jitter.normalize(jitter);

    auto [r1, r2] = compute_rewards(m, rw_);

    StepResult res;
    res.kpi = KpiRecord{slot_,   packet_loss, mean_attempts, latency,
                        jitter,  sinr_eff,    ind.rssi_w,    ind.rsrp_w,
                        r1,      r2,          logits.first,  logits.second};
    res.r1 = r1;
    res.r2 = r2;
    res.obs.a1 = make_obs({packet_loss, m.latency, m.jitter}, logits);
    res.obs.a2 = make_obs({m.sinr, m.rssi, m.rsrp}, logits);
    kpis_.push_back(res.kpi);

    prev_ = act;
    ep_.advance_slot();
    ++slot_;
    if (slot_ >= sc_.episode_slots) {
      active_ = false;
      res.done = true;
    }
    return res;
  }

 private:
  struct Trackers {
    NormalizationTracker loss{0.0, 1.0, false};
    NormalizationTracker sinr_db{-10.0, 40.0, false};
    NormalizationTracker rssi_dbm{-140.0, -40.0, false};
    NormalizationTracker rsrp_dbm{-140.0, -40.0, false};
    NormalizationTracker latency{0.0, 0.020, true};
    NormalizationTracker jitter{0.0, 0.010, true};
  };

  static double safe_dbm(double watts) {
    if (watts <= 0.0) return -160.0;
    return watts_to_dbm(watts);
  }

  bool beam_moved(const BeamAngles& a, const BeamAngles& b) const {
    double th = sc_.penalties.beam_threshold_rad;
    return std::abs(a.theta_uav - b.theta_uav) > th ||
           std::abs(a.phi_uav - b.phi_uav) > th ||
           std::abs(a.theta_gnb - b.theta_gnb) > th ||
           std::abs(a.phi_gnb - b.phi_gnb) > th;
  }

  static bool notch_changed(const RecoveryAction& a, const RecoveryAction& b) {
    bool a_on = a.i_notch == 1 && a.rb_num > 0;
    bool b_on = b.i_notch == 1 && b.rb_num > 0;
    if (a_on != b_on) return true;
    if (!a_on) return false;
    return a.rb_start != b.rb_start || a.rb_num != b.rb_num ||
           a.bwp_idx != b.bwp_idx;
  }

  Eigen::VectorXd make_obs(std::initializer_list<double> vals,
                           std::pair<double, double> logits) const {
    Eigen::VectorXd v(obs_dim());
    int i = 0;
    for (double x : vals) v(i++) = x;
    if (detector_) {
      v(i++) = logits.first;
      v(i++) = logits.second;
    }
    return v;
  }

  AgentObs neutral_obs() const {
    AgentObs o;
    o.a1 = make_obs({0.5, 0.5, 0.5}, {0.0, 0.0});
    o.a2 = make_obs({0.5, 0.5, 0.5}, {0.0, 0.0});
    return o;
  }

  void push_window(double rssi_dbm, double sinr_db) {
    size_t w = static_cast<size_t>(detector_->window_len());
    if (rssi_win_.empty()) {
      rssi_win_.assign(w, rssi_dbm);
      sinr_win_.assign(w, sinr_db);
      return;
    }
    rssi_win_.erase(rssi_win_.begin());
    sinr_win_.erase(sinr_win_.begin());
    rssi_win_.push_back(rssi_dbm);
    sinr_win_.push_back(sinr_db);
  }

  ScenarioConfig sc_;
  RewardWeights rw_;
  const LogitSource* detector_;
  Rng rng_;
  EpisodeRealization ep_;
  int slot_ = 0;
  bool active_ = false;
  TimingState timing_;
  std::optional<RecoveryAction> prev_;
  std::vector<KpiRecord> kpis_;
  double notch_rb_sum_ = 0.0;
  std::vector<double> rssi_win_, sinr_win_;
  Trackers trackers_;
};

// Effective SINR of the plain (un-notched) link for a given beam choice.
inline double probe_effective_sinr(const ScenarioConfig& sc,
                                   const EpisodeRealization& ep, int bwp_idx,
                                   const BeamAngles& beams, int slot = 0) {
  PerRbRadioState st = assemble_per_rb_powers(sc, ep, bwp_idx, beams, slot);
  return effective_sinr(st.sinr, sc.esm);
}

}  // namespace jamshield
