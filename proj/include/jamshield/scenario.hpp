#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "jamshield/common.hpp"
#include "jamshield/link.hpp"
#include "jamshield/propagation.hpp"
#include "jamshield/radio.hpp"

namespace jamshield {

// Axis-aligned building used by the optional ray-blocking test.
struct BlockBox {
  Eigen::Vector3d lo, hi;

  bool blocks(const Eigen::Vector3d& a, const Eigen::Vector3d& b) const {
    // slab test for segment-box intersection
    double t0 = 0.0, t1 = 1.0;
    Eigen::Vector3d d = b - a;
    for (int i = 0; i < 3; ++i) {
      if (std::abs(d(i)) < 1e-12) {
        if (a(i) < lo(i) || a(i) > hi(i)) return false;
      } else {
        double u = (lo(i) - a(i)) / d(i);
        double v = (hi(i) - a(i)) / d(i);
        if (u > v) std::swap(u, v);
        t0 = std::max(t0, u);
        t1 = std::min(t1, v);
        if (t0 > t1) return false;
      }
    }
    return true;
  }
};

enum class LosMode { kProbabilistic, kForceLos, kForceNlos };

struct ReconfPenalties {
  double bwp_switch_s = 1.0e-3;
  double beam_update_s = 0.125e-3;
  double notch_update_s = 0.25e-3;
  double beam_threshold_rad = 0.01;  // smaller nudges are free

  void validate() const {
    if (bwp_switch_s < 0 || beam_update_s < 0 || notch_update_s < 0 ||
        beam_threshold_rad < 0)
      throw ConfigError("penalties must be >= 0");
  }
};

struct ScenarioConfig {
  double area_side_m = 1000.0;
  double gnb_height_m = 10.0;
  double uav_height_m = 30.0;
  double uav_distance_m = 100.0;
  double uav_speed_mps = 10.0;
  int num_gnb = 2;  // one serving, the rest interfere
  double uav_tx_power_dbm = 2.0;        // per RB
  double interferer_tx_power_dbm = 4.0; // per RB, each non-serving cell
  int terrestrial_users = 0;
  double terrestrial_load_per_user = 0.1;
  int m_uav = 4;
  int m_gnb = 4;
  std::string env_label = "UMi";
  bool randomize_positions = true;

  PathLossConstants pathloss;
  ShadowFading shadowing;
  ClusterFadingConfig fading;
  NoiseModel noise;
  CarrierPlan carrier;
  BwpConfig bwp0;
  BwpConfig bwp1;
  EsmConfig esm;
  ReconfPenalties penalties;
  std::vector<JammerConfig> jammers;

  double notch_efficiency = 1.0;
  int notch_max = 16;
  int r_max_limit = 4;
  PerMode per_mode = PerMode::kAsWritten;

  LosMode los_mode = LosMode::kProbabilistic;
  double los_d0_m = 50.0;
  bool use_blocking_boxes = false;
  int num_boxes = 20;

  bool disable_fading = false;
  bool disable_shadowing = false;
  double ambient_doppler_hz = 5.0;  // static-link phase drift

  int episode_slots = 200;
  int packets_per_slot = 10;

  ScenarioConfig() {
    bwp1.index = 1;
    bwp1.center_hz = 3.55e9;
    bwp1.bandwidth_hz = 50e6;
    bwp1.numerology = 3;
    bwp1.n_rb = 32;
    bwp1.slot_duration_s = 1e-3 / 8.0;
  }

  const BwpConfig& bwp(int idx) const { return idx == 0 ? bwp0 : bwp1; }

  void validate() const {
    if (area_side_m <= 0) throw ConfigError("scenario.area_side must be > 0");
    if (num_gnb < 1) throw ConfigError("scenario.num_gnb must be >= 1");
    if (m_uav < 1 || m_gnb < 1)
      throw ConfigError("scenario antenna counts must be >= 1");
    if (uav_distance_m <= 0)
      throw ConfigError("scenario.uav_distance must be > 0");
    if (terrestrial_users < 0 || terrestrial_load_per_user < 0)
      throw ConfigError("scenario terrestrial load must be >= 0");
    if (notch_efficiency < 0 || notch_efficiency > 1)
      throw ConfigError("scenario.notch_efficiency must lie in [0,1]");
    if (notch_max < 0) throw ConfigError("scenario.notch_max must be >= 0");
    if (r_max_limit < 0) throw ConfigError("scenario.r_max_limit must be >= 0");
    if (los_d0_m <= 0) throw ConfigError("scenario.los_d0 must be > 0");
    if (num_boxes < 0) throw ConfigError("scenario.num_boxes must be >= 0");
    if (episode_slots < 1) throw ConfigError("scenario.episode_slots must be >= 1");
    if (packets_per_slot < 1)
      throw ConfigError("scenario.packets_per_slot must be >= 1");
    if (ambient_doppler_hz < 0)
      throw ConfigError("scenario.ambient_doppler must be >= 0");
    pathloss.validate();
    shadowing.validate();
    fading.validate();
    noise.validate();
    carrier.validate();
    bwp0.validate();
    bwp1.validate();
    esm.validate();
    penalties.validate();
    for (const auto& j : jammers) j.validate();
  }
};

// Per-cluster complex contributions on one RB grid, advanced slot by slot via
// a fixed Doppler rotation, so repeated slots cost only complex multiplies.
class FadingTrack {
 public:
  FadingTrack() = default;

  FadingTrack(const ClusterRealization& c, int n_rb, double rb_bw_hz,
              double slot_s) {
    contrib_.resize(n_rb, c.powers.size());
    step_.resize(c.powers.size());
    for (int i = 0; i < c.powers.size(); ++i) {
      double w = 2.0 * kPi * c.doppler_hz(i) * slot_s;
      step_(i) = std::complex<double>(std::cos(w), std::sin(w));
      double amp = std::sqrt(c.powers(i));
      for (int k = 0; k < n_rb; ++k) {
        double f = (k - 0.5 * (n_rb - 1)) * rb_bw_hz;
        double ph = c.phases_rad(i) - 2.0 * kPi * f * c.delays_s(i);
        contrib_(k, i) = amp * std::complex<double>(std::cos(ph), std::sin(ph));
      }
    }
    refresh();
  }

  void advance() {
    for (int i = 0; i < contrib_.cols(); ++i) contrib_.col(i) *= step_(i);
    refresh();
  }

  const Eigen::VectorXd& per_rb_power() const { return power_; }

 private:
  void refresh() {
    power_.resize(contrib_.rows());
    for (int k = 0; k < contrib_.rows(); ++k)
      power_(k) = std::norm(contrib_.row(k).sum());
  }

  Eigen::MatrixXcd contrib_;
  Eigen::VectorXcd step_;
  Eigen::VectorXd power_;
};

// Everything random about one episode's radio world, drawn up front.
struct LinkRealization {
  Eigen::Vector3d from, to;
  bool los = true;
  double shadow_db = 0.0;
  ClusterRealization clusters;
  FadingTrack track[2];  // one per BWP grid

  double distance() const { return std::max(1.0, (to - from).norm()); }
};

struct EpisodeRealization {
  Eigen::Vector3d uav_pos, serving_gnb_pos;
  std::vector<Eigen::Vector3d> interferer_pos;
  std::vector<Eigen::Vector3d> jammer_pos;
  std::vector<BlockBox> boxes;

  LinkRealization uav_link;                 // UAV -> serving gNB
  std::vector<LinkRealization> jam_links;   // jammer -> serving gNB
  std::vector<LinkRealization> interf_links;

  ArrayGeometry uav_array, gnb_array;
  double noise_rb_w[2] = {0.0, 0.0};

  void advance_slot() {
    for (int b = 0; b < 2; ++b) uav_link.track[b].advance();
    for (auto& l : jam_links)
      for (int b = 0; b < 2; ++b) l.track[b].advance();
    for (auto& l : interf_links)
      for (int b = 0; b < 2; ++b) l.track[b].advance();
  }
};

namespace detail {

inline bool draw_los(const ScenarioConfig& sc, const Eigen::Vector3d& a,
                     const Eigen::Vector3d& b,
                     const std::vector<BlockBox>& boxes, double d, Rng& rng) {
  switch (sc.los_mode) {
    case LosMode::kForceLos: return true;
    case LosMode::kForceNlos: return false;
    case LosMode::kProbabilistic: break;
  }
  for (const auto& box : boxes)
    if (box.blocks(a, b)) return false;
  double p = std::min(1.0, sc.los_d0_m / d);
  return rng.uniform() < p;
}

inline LinkRealization draw_link(const ScenarioConfig& sc,
                                 const Eigen::Vector3d& from,
                                 const Eigen::Vector3d& to,
                                 const std::vector<BlockBox>& boxes,
                                 double doppler_hz, Rng& rng) {
  LinkRealization l;
  l.from = from;
  l.to = to;
  l.los = draw_los(sc, from, to, boxes, l.distance(), rng);
  double sigma = l.los ? sc.shadowing.sigma_los_db : sc.shadowing.sigma_nlos_db;
  l.shadow_db =
      (sc.disable_shadowing || sigma <= 0.0) ? 0.0 : rng.normal(0.0, sigma);
  l.clusters = ClusterRealization::draw(sc.fading, rng, doppler_hz);
  for (int b = 0; b < 2; ++b) {
    const BwpConfig& bwp = sc.bwp(b);
    l.track[b] = FadingTrack(l.clusters, bwp.n_rb, bwp.rb_bandwidth_hz(),
                             bwp.slot_duration_s);
  }
  return l;
}

}  // namespace detail

inline EpisodeRealization draw_episode(const ScenarioConfig& sc, Rng& rng) {
  sc.validate();
  EpisodeRealization ep;
  double side = sc.area_side_m;
  ep.serving_gnb_pos = {0.5 * side, 0.5 * side, sc.gnb_height_m};

  // Fixed layouts pin the UAV east of the serving cell so every episode
  // shares one geometry; randomized layouts draw a fresh bearing.
  double bearing = sc.randomize_positions ? rng.uniform(0.0, 2.0 * kPi) : 0.0;
  ep.uav_pos = ep.serving_gnb_pos +
               Eigen::Vector3d(sc.uav_distance_m * std::cos(bearing),
                               sc.uav_distance_m * std::sin(bearing), 0.0);
  ep.uav_pos.z() = sc.uav_height_m;

  for (int i = 1; i < sc.num_gnb; ++i)
    ep.interferer_pos.emplace_back(rng.uniform(0.0, side),
                                   rng.uniform(0.0, side), sc.gnb_height_m);
  for (const auto& j : sc.jammers) {
    if (sc.randomize_positions)
      ep.jammer_pos.emplace_back(rng.uniform(0.0, side),
                                 rng.uniform(0.0, side), j.position.z());
    else
      ep.jammer_pos.push_back(j.position);
  }
  if (sc.use_blocking_boxes) {
    for (int i = 0; i < sc.num_boxes; ++i) {
      double w = rng.uniform(20.0, 60.0);
      double l = rng.uniform(20.0, 60.0);
      double h = rng.uniform(5.0, 25.0);
      double x = rng.uniform(0.0, side - w);
      double y = rng.uniform(0.0, side - l);
      ep.boxes.push_back({{x, y, 0.0}, {x + w, y + l, h}});
    }
  }

  double wl = sc.pathloss.wavelength_m();
  ep.uav_array = ArrayGeometry::ura(sc.m_uav, wl);
  ep.gnb_array = ArrayGeometry::ura(sc.m_gnb, wl);

  double uav_doppler = sc.uav_speed_mps / wl;
  ep.uav_link = detail::draw_link(sc, ep.uav_pos, ep.serving_gnb_pos, ep.boxes,
                                  uav_doppler, rng);
  for (const auto& p : ep.jammer_pos)
    ep.jam_links.push_back(detail::draw_link(sc, p, ep.serving_gnb_pos,
                                             ep.boxes, sc.ambient_doppler_hz,
                                             rng));
  for (const auto& p : ep.interferer_pos)
    ep.interf_links.push_back(detail::draw_link(sc, p, ep.serving_gnb_pos,
                                                ep.boxes,
                                                sc.ambient_doppler_hz, rng));

  for (int b = 0; b < 2; ++b)
    ep.noise_rb_w[b] = noise_power(sc.noise, sc.bwp(b).rb_bandwidth_hz());
  return ep;
}

// Large-scale linear gain of one link, shadowing included.
inline double link_large_scale(const ScenarioConfig& sc,
                               const LinkRealization& l) {
  return path_loss(l.distance(), l.los, sc.pathloss) *
         db_to_linear(l.shadow_db);
}

inline Eigen::VectorXd link_fading(const ScenarioConfig& sc,
                                   const LinkRealization& l, int bwp_idx,
                                   int n_rb) {
  if (sc.disable_fading) return Eigen::VectorXd::Ones(n_rb);
  return l.track[bwp_idx].per_rb_power();
}

// Per-RB powers at the serving gNB for one slot. Pure given the realization.
inline PerRbRadioState assemble_per_rb_powers(const ScenarioConfig& sc,
                                              const EpisodeRealization& ep,
                                              int bwp_idx,
                                              const BeamAngles& beams,
                                              int slot) {
  if (sc.num_gnb < 1) throw ConfigError("scenario has no base station");
  const BwpConfig& bwp = sc.bwp(bwp_idx);
  const int n = bwp.n_rb;

  Eigen::VectorXcd w_uav = steering_vector(beams.uav(), ep.uav_array);
  Eigen::VectorXcd w_gnb = steering_vector(beams.gnb(), ep.gnb_array);

  PerRbRadioState st;
  st.p_uav.resize(n);
  st.p_jam = Eigen::VectorXd::Zero(n);
  st.p_interf = Eigen::VectorXd::Zero(n);
  st.p_noise = Eigen::VectorXd::Constant(n, ep.noise_rb_w[bwp_idx]);

  // desired link
  {
    const LinkRealization& l = ep.uav_link;
    Direction dep = direction_between(l.from, l.to);
    Direction arr = direction_between(l.to, l.from);
    double g_tx = l.clusters.weighted_gain(w_uav, dep, ep.uav_array, false);
    double g_rx = l.clusters.weighted_gain(w_gnb, arr, ep.gnb_array, true);
    double big = link_large_scale(sc, l);
    double p_tx = dbm_to_watts(sc.uav_tx_power_dbm);
    Eigen::VectorXd fad = link_fading(sc, l, bwp_idx, n);
    st.p_uav = p_tx * g_tx * g_rx * big * fad;
  }

  // jammers, windowed by strategy
  for (size_t ji = 0; ji < ep.jam_links.size(); ++ji) {
    const LinkRealization& l = ep.jam_links[ji];
    const JammerConfig& jc = sc.jammers[ji];
    JamWindow win = jam_window(jc, sc.carrier, bwp.rb_bandwidth_hz(), slot);
    Eigen::VectorXd occ = jam_occupancy(win, bwp);
    if (occ.sum() == 0.0) continue;
    Direction arr = direction_between(l.to, l.from);
    double g_rx = l.clusters.weighted_gain(w_gnb, arr, ep.gnb_array, true);
    double big = link_large_scale(sc, l);
    double p_tx = dbm_to_watts(jc.tx_power_dbm) * jc.antenna_gain_linear;
    Eigen::VectorXd fad = link_fading(sc, l, bwp_idx, n);
    st.p_jam += p_tx * g_rx * big * (occ.array() * fad.array()).matrix();
  }

  // neighboring cells plus terrestrial load
  double load = 1.0 + sc.terrestrial_load_per_user * sc.terrestrial_users;
  for (const auto& l : ep.interf_links) {
    Direction arr = direction_between(l.to, l.from);
    double g_rx = l.clusters.weighted_gain(w_gnb, arr, ep.gnb_array, true);
    double big = link_large_scale(sc, l);
    double p_tx = dbm_to_watts(sc.interferer_tx_power_dbm);
    Eigen::VectorXd fad = link_fading(sc, l, bwp_idx, n);
    st.p_interf += load * p_tx * g_rx * big * fad;
  }

  st.sinr = sinr_per_rb(st);
  return st;
}

}  // namespace jamshield
