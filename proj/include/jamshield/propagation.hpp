#pragma once

#include <Eigen/Dense>
#include <complex>
#include <vector>

#include "jamshield/common.hpp"

namespace jamshield {

// Large-scale gain constants of the two-regime distance power law.
struct PathLossConstants {
  double gamma_los = 4.4668359215096305e-05;  // free-space-like at 3.5 GHz
  double eta_nlos = 4.4668359215096305e-07;   // 20 dB below the LoS constant
  double alpha = 2.0;
  double fc_hz = 3.5e9;

  double wavelength_m() const { return kSpeedOfLight / fc_hz; }

  void validate() const {
    if (gamma_los <= 0.0) throw ConfigError("pathloss.gamma_los must be > 0");
    if (eta_nlos <= 0.0) throw ConfigError("pathloss.eta_nlos must be > 0");
    if (eta_nlos > gamma_los)
      throw ConfigError("pathloss.eta_nlos must not exceed gamma_los");
    if (alpha < 1.0) throw ConfigError("pathloss.alpha must be >= 1");
    if (fc_hz <= 0.0) throw ConfigError("pathloss.fc_hz must be > 0");
  }
};

// Linear attenuation factor. Strictly decreasing in distance.
inline double path_loss(double d_m, bool los, const PathLossConstants& c) {
  if (d_m <= 0.0) throw std::domain_error("path_loss: distance must be > 0");
  double k = los ? c.gamma_los : c.eta_nlos;
  return k * std::pow(d_m, -c.alpha);
}

struct ShadowFading {
  double sigma_los_db = 4.0;
  double sigma_nlos_db = 7.8;

  void validate() const {
    if (sigma_los_db < 0.0 || sigma_nlos_db < 0.0)
      throw ConfigError("shadowing.sigma must be >= 0");
  }
};

// Simplified parametric cluster model: exponentially decaying cluster powers,
// exponential delays, uniform phases, Gaussian angular offsets per cluster.
struct ClusterFadingConfig {
  int num_clusters = 8;
  double delay_spread_s = 100e-9;
  double asa_deg = 5.0;
  double asd_deg = 5.0;
  double zsa_deg = 2.0;
  double zsd_deg = 2.0;
  double per_cluster_power_decay_db = 3.0;

  void validate() const {
    if (num_clusters < 1) throw ConfigError("fading.num_clusters must be >= 1");
    if (delay_spread_s < 0 || asa_deg < 0 || asd_deg < 0 || zsa_deg < 0 ||
        zsd_deg < 0 || per_cluster_power_decay_db < 0)
      throw ConfigError("fading: spreads must be >= 0");
  }
};

struct ArrayGeometry {
  int num_elements = 1;
  std::vector<Eigen::Vector3d> element_positions;  // meters
  double wavelength_m = kSpeedOfLight / 3.5e9;

  // Uniform rectangular array in the x-y plane at half-wavelength spacing.
  static ArrayGeometry ura(int m, double wavelength) {
    ArrayGeometry g;
    g.num_elements = m;
    g.wavelength_m = wavelength;
    int cols = 1;
    while (cols * cols < m) ++cols;  // smallest square grid holding m
    double d = 0.5 * wavelength;
    for (int i = 0; i < m; ++i) {
      g.element_positions.emplace_back((i % cols) * d, (i / cols) * d, 0.0);
    }
    return g;
  }

  void validate() const {
    if (num_elements < 1) throw ConfigError("array.num_elements must be >= 1");
    if (static_cast<int>(element_positions.size()) != num_elements)
      throw ConfigError("array: element_positions size mismatch");
    if (wavelength_m <= 0.0) throw ConfigError("array.wavelength must be > 0");
  }
};

// Zenith angle theta in [0, pi], azimuth phi in [0, 2*pi).
struct Direction {
  double theta = 0.0;
  double phi = 0.0;
};

struct BeamAngles {
  double theta_uav = kPi / 2;
  double phi_uav = 0.0;
  double theta_gnb = kPi / 2;
  double phi_gnb = 0.0;

  Direction uav() const { return {theta_uav, phi_uav}; }
  Direction gnb() const { return {theta_gnb, phi_gnb}; }
};

inline Eigen::Vector3d unit_vector(const Direction& d) {
  return {std::sin(d.theta) * std::cos(d.phi),
          std::sin(d.theta) * std::sin(d.phi), std::cos(d.theta)};
}

// Direction of the ray from one point toward another.
inline Direction direction_between(const Eigen::Vector3d& from,
                                   const Eigen::Vector3d& to) {
  Eigen::Vector3d v = to - from;
  double r = v.norm();
  if (r == 0.0) return {0.0, 0.0};
  double theta = std::acos(clamp(v.z() / r, -1.0, 1.0));
  double phi = std::atan2(v.y(), v.x());
  if (phi < 0.0) phi += 2.0 * kPi;
  return {theta, phi};
}

inline Direction offset_direction(const Direction& d, double dtheta,
                                  double dphi) {
  double theta = clamp(d.theta + dtheta, 0.0, kPi);
  double phi = std::fmod(d.phi + dphi, 2.0 * kPi);
  if (phi < 0.0) phi += 2.0 * kPi;
  return {theta, phi};
}

// Unit-norm per-element phasing pointing the array toward (theta, phi).
inline Eigen::VectorXcd steering_vector(const Direction& d,
                                        const ArrayGeometry& geom) {
  const double k = 2.0 * kPi / geom.wavelength_m;
  Eigen::Vector3d wave = k * unit_vector(d);
  Eigen::VectorXcd w(geom.num_elements);
  const double scale = 1.0 / std::sqrt(static_cast<double>(geom.num_elements));
  for (int m = 0; m < geom.num_elements; ++m) {
    double phase = wave.dot(geom.element_positions[m]);
    w(m) = scale * std::complex<double>(std::cos(phase), std::sin(phase));
  }
  return w;
}

// Power gain of weight vector w toward an incoming/outgoing direction.
// Peaks at num_elements when w matches the direction's steering vector.
inline double array_gain(const Eigen::VectorXcd& w, const Direction& d,
                         const ArrayGeometry& geom) {
  Eigen::VectorXcd a = steering_vector(d, geom);
  std::complex<double> dot = a.adjoint() * w;
  return std::norm(dot) * static_cast<double>(geom.num_elements);
}

// One multipath realization of a link: cluster powers sum to 1, delays set
// the frequency selectivity, per-cluster angle offsets spread the directional
// gain, Doppler rates rotate phases across slots.
struct ClusterRealization {
  Eigen::VectorXd powers;       // linear, sums to 1
  Eigen::VectorXd delays_s;
  Eigen::VectorXd phases_rad;   // initial phases
  Eigen::VectorXd doppler_hz;   // per-cluster phase rotation rate
  Eigen::VectorXd aoa_off_rad, zoa_off_rad;  // arrival-side offsets
  Eigen::VectorXd aod_off_rad, zod_off_rad;  // departure-side offsets

  static ClusterRealization draw(const ClusterFadingConfig& cfg, Rng& rng,
                                 double max_doppler_hz = 0.0) {
    const int n = cfg.num_clusters;
    ClusterRealization c;
    c.powers.resize(n);
    c.delays_s.resize(n);
    c.phases_rad.resize(n);
    c.doppler_hz.resize(n);
    c.aoa_off_rad.resize(n);
    c.zoa_off_rad.resize(n);
    c.aod_off_rad.resize(n);
    c.zod_off_rad.resize(n);
    const double deg = kPi / 180.0;
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      c.powers(i) = db_to_linear(-cfg.per_cluster_power_decay_db * i);
      total += c.powers(i);
      c.delays_s(i) =
          i == 0 ? 0.0 : -cfg.delay_spread_s * std::log(1.0 - rng.uniform());
      c.phases_rad(i) = rng.uniform(0.0, 2.0 * kPi);
      c.doppler_hz(i) = max_doppler_hz * std::cos(rng.uniform(0.0, 2.0 * kPi));
      c.aoa_off_rad(i) = i == 0 ? 0.0 : rng.normal(0.0, cfg.asa_deg * deg);
      c.zoa_off_rad(i) = i == 0 ? 0.0 : rng.normal(0.0, cfg.zsa_deg * deg);
      c.aod_off_rad(i) = i == 0 ? 0.0 : rng.normal(0.0, cfg.asd_deg * deg);
      c.zod_off_rad(i) = i == 0 ? 0.0 : rng.normal(0.0, cfg.zsd_deg * deg);
    }
    c.powers /= total;
    return c;
  }

  // |H(f_k)|^2 per resource block at time t. Unit mean over phase draws.
  Eigen::VectorXd per_rb_power(int n_rb, double rb_bandwidth_hz,
                               double t_s = 0.0) const {
    Eigen::VectorXd out(n_rb);
    for (int k = 0; k < n_rb; ++k) {
      double f = (k - 0.5 * (n_rb - 1)) * rb_bandwidth_hz;
      std::complex<double> h{0.0, 0.0};
      for (int i = 0; i < powers.size(); ++i) {
        double phase = phases_rad(i) - 2.0 * kPi * f * delays_s(i) +
                       2.0 * kPi * doppler_hz(i) * t_s;
        h += std::sqrt(powers(i)) *
             std::complex<double>(std::cos(phase), std::sin(phase));
      }
      out(k) = std::norm(h);
    }
    return out;
  }

  // Cluster-power-weighted directional gain around a mean direction.
  double weighted_gain(const Eigen::VectorXcd& w, const Direction& mean,
                       const ArrayGeometry& geom, bool arrival_side) const {
    double g = 0.0;
    for (int i = 0; i < powers.size(); ++i) {
      Direction d = arrival_side
                        ? offset_direction(mean, zoa_off_rad(i), aoa_off_rad(i))
                        : offset_direction(mean, zod_off_rad(i), aod_off_rad(i));
      g += powers(i) * array_gain(w, d, geom);
    }
    return g;
  }
};

struct ChannelDraw {
  Eigen::VectorXd per_rb_factor;  // linear small-scale power factors
  double shadow_db = 0.0;         // one log-normal draw
};

// Single-link small-scale + shadowing draw. Deterministic given the stream.
inline ChannelDraw channel_realization(const ClusterFadingConfig& cfg,
                                       const ShadowFading& shadow, bool los,
                                       int n_rb, Rng& rng,
                                       double rb_bandwidth_hz = 180e3) {
  if (n_rb < 1) throw std::domain_error("channel_realization: n_rb must be >= 1");
  ChannelDraw d;
  ClusterRealization c = ClusterRealization::draw(cfg, rng);
  d.per_rb_factor = c.per_rb_power(n_rb, rb_bandwidth_hz);
  double sigma = los ? shadow.sigma_los_db : shadow.sigma_nlos_db;
  d.shadow_db = sigma > 0.0 ? rng.normal(0.0, sigma) : 0.0;
  return d;
}

}  // namespace jamshield
