#include <catch2/catch_amalgamated.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "jamshield/pipeline.hpp"

using namespace jamshield;
namespace fs = std::filesystem;

namespace {

void criterion_line(int id, const std::string& title, bool pass,
            const std::string& detail) {
  std::cout << "[" << (pass ? "PASS" : "FAIL") << "] criterion " << id << ": "
            << title;
  if (!detail.empty()) std::cout << " (" << detail << ")";
  std::cout << std::endl;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(4);
  os << v;
  return os.str();
}

bool rel_ok(double got, double want, double tol = 1e-9) {
  double denom = std::max(std::abs(want), 1e-300);
  return std::abs(got - want) / denom <= tol;
}

std::string slurp_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

fs::path fresh_dir(const std::string& name) {
  fs::path p = fs::temp_directory_path() / name;
  fs::remove_all(p);
  return p;
}

// ---- shared evaluation preset ----
//
// One sweep jammer parked close to the serving cell so the band it covers is
// unrecoverable by beamforming alone; the defense has to notch or hop parts.
// A small EESM beta makes partially jammed bands actually lossy instead of
// being averaged away.

JammerConfig sweep_jammer(double dbm, const ScenarioConfig& sc) {
  JammerConfig j;
  j.strategy = JamStrategy::kSweep;
  j.rb_span = 12;
  j.period_slots = 16;
  j.tx_power_dbm = dbm;
  j.position = {0.5 * sc.area_side_m + 12.0, 0.5 * sc.area_side_m,
                sc.gnb_height_m};
  return j;
}

ScenarioConfig battle_scenario() {
  ScenarioConfig sc;
  sc.los_mode = LosMode::kForceLos;
  sc.disable_shadowing = true;
  sc.randomize_positions = false;
  sc.episode_slots = 40;
  sc.packets_per_slot = 4;
  sc.esm.beta_eesm = 0.25;
  sc.jammers = {sweep_jammer(5.0, sc)};
  return sc;
}

trainer::TrainerConfig battle_trainer() {
  trainer::TrainerConfig t;
  t.epochs = 150;
  t.episodes_per_iter = 2;
  t.hidden = {32, 32};
  t.lr_start = 2e-3;
  t.lr_end = 2e-4;
  t.batch_start = 32;
  t.batch_end = 80;
  return t;
}

detector::DetectorModel train_battle_detector(const ScenarioConfig& sc) {
  config::AppConfig dc;
  dc.scenario = sc;
  JammerConfig barrage = sc.jammers.at(0);
  barrage.strategy = JamStrategy::kBarrage;
  dc.scenario.jammers = {barrage};
  dc.detector.train.pipeline.window_len = 6;
  dc.detector.train.pipeline.stride = 3;
  dc.detector.train.pipeline.pca_components = 5;
  dc.detector.train.encoder_widths = {16, 8};
  dc.detector.train.steps = 200;
  dc.detector.train.batch = 16;
  dc.detector.episodes_per_class = 6;
  return pipeline::train_detector_from_scenario(dc, 909);
}

struct Campaign {
  ScenarioConfig scenario;
  trainer::TrainerConfig tcfg;
  std::shared_ptr<detector::DetectorRuntime> det;
  std::vector<std::uint64_t> seeds{101, 202, 303};
  std::map<trainer::Variant, std::vector<trainer::TrainResult>> runs;
};

Campaign build_campaign() {
  Campaign c;
  c.scenario = battle_scenario();
  c.tcfg = battle_trainer();
  c.det = std::make_shared<detector::DetectorRuntime>(
      train_battle_detector(c.scenario));
  for (trainer::Variant v : {trainer::Variant::kIppo, trainer::Variant::kMappo,
                             trainer::Variant::kMappoDet}) {
    const detector::DetectorRuntime* dp =
        v == trainer::Variant::kMappoDet ? c.det.get() : nullptr;
    for (std::uint64_t seed : c.seeds) {
      ScenarioConfig sc = c.scenario;
      auto factory = [sc, dp] {
        return std::make_unique<trainer::JammingTrainEnv>(sc, RewardWeights{},
                                                          dp);
      };
      trainer::Trainer tr(c.tcfg, v, factory, seed);
      c.runs[v].push_back(tr.run());
    }
  }
  return c;
}

const Campaign& campaign() {
  static Campaign c = build_campaign();
  return c;
}

constexpr int kEvalEpisodes = 5;

std::uint64_t eval_env_seed(int seed_idx, int ep) {
  return derive_seed(0xACCE5500u, "eval-env",
                     static_cast<std::uint64_t>(seed_idx * 64 + ep));
}

struct PolicyEval {
  double frac_low = 0.0;
  double mean_latency = 0.0;
  double mean_loss = 0.0;
};

// Same environment seeds for every policy under test.
PolicyEval eval_policy(const trainer::TrainResult* pol,
                       const detector::DetectorRuntime* det, int seed_idx,
                       bool random_policy) {
  const Campaign& c = campaign();
  double low = 0.0, lat = 0.0, loss = 0.0;
  int slots = 0;
  for (int ep = 0; ep < kEvalEpisodes; ++ep) {
    trainer::JammingTrainEnv env(c.scenario, RewardWeights{}, det);
    pipeline::RolloutResult rr = pipeline::rollout(
        env, pol,
        random_policy ? pipeline::RolloutPolicy::kRandom
                      : pipeline::RolloutPolicy::kTrained,
        eval_env_seed(seed_idx, ep),
        derive_seed(0xACCE5501u, "eval-act",
                    static_cast<std::uint64_t>(seed_idx * 64 + ep)),
        !random_policy);
    for (const auto& k : rr.kpis) {
      low += k.packet_loss < 0.2 ? 1.0 : 0.0;
      lat += k.latency_s;
      loss += k.packet_loss;
      ++slots;
    }
  }
  PolicyEval pe;
  pe.frac_low = low / slots;
  pe.mean_latency = lat / slots;
  pe.mean_loss = loss / slots;
  return pe;
}

// Iteration at which the smoothed training curve first reaches 90% of its
// total improvement; curves that never improve count as the full run.
int epochs_to_level(const std::vector<trainer::CurvePoint>& curve) {
  const int n = static_cast<int>(curve.size());
  std::vector<double> s(n);
  for (int i = 0; i < n; ++i) {
    int lo = std::max(0, i - 4);
    double acc = 0.0;
    for (int k = lo; k <= i; ++k) acc += curve[k].mean_return;
    s[i] = acc / (i - lo + 1);
  }
  int head = std::min(3, n);
  double start = 0.0;
  for (int i = 0; i < head; ++i) start += s[i];
  start /= head;
  int tail = std::min(10, n);
  double fin = 0.0;
  for (int i = n - tail; i < n; ++i) fin += s[i];
  fin /= tail;
  if (!(fin > start)) return n;
  double thr = start + 0.9 * (fin - start);
  for (int i = 0; i < n; ++i)
    if (s[i] >= thr) return i + 1;
  return n;
}

// ---- beam grid search ----

constexpr double kDeg = kPi / 180.0;

// The transmit beam only scales the numerator of every per-RB SINR, so the
// joint optimum factorizes: pick the transmit beam by its gain alone, then
// sweep the receive beam against the full effective-SINR probe.
BeamAngles best_grid_beams(const ScenarioConfig& sc,
                           const EpisodeRealization& ep, int bwp_idx) {
  const LinkRealization& l = ep.uav_link;
  Direction dep = direction_between(l.from, l.to);
  Direction best_u{0.0, 0.0};
  double best_g = -1.0;
  for (int th = 0; th <= 180; th += 2) {
    for (int ph = 0; ph < 360; ph += 2) {
      Direction d{th * kDeg, ph * kDeg};
      double g = l.clusters.weighted_gain(steering_vector(d, ep.uav_array), dep,
                                          ep.uav_array, false);
      if (g > best_g) {
        best_g = g;
        best_u = d;
      }
    }
  }
  BeamAngles beams;
  beams.theta_uav = best_u.theta;
  beams.phi_uav = best_u.phi;
  double best_eff = -1.0;
  Direction best_r{kPi / 2, 0.0};
  for (int th = 0; th <= 180; th += 2) {
    for (int ph = 0; ph < 360; ph += 2) {
      beams.theta_gnb = th * kDeg;
      beams.phi_gnb = ph * kDeg;
      double eff = probe_effective_sinr(sc, ep, bwp_idx, beams, 0);
      if (eff > best_eff) {
        best_eff = eff;
        best_r = {beams.theta_gnb, beams.phi_gnb};
      }
    }
  }
  beams.theta_gnb = best_r.theta;
  beams.phi_gnb = best_r.phi;
  return beams;
}

double probe_db(const ScenarioConfig& sc, const EpisodeRealization& ep,
                int bwp_idx, const BeamAngles& beams) {
  return safe_db(probe_effective_sinr(sc, ep, bwp_idx, beams, 0));
}

// ---- finite differences ----

template <typename Build>
double eval_scalar(const nn::ParamStore& ps, const Build& build) {
  ad::Tape t;
  nn::TapeBinding b = nn::bind(t, ps);
  return t.val(build(t, b))(0, 0);
}

template <typename Build>
double max_fd_rel_err(nn::ParamStore& ps, const Build& build,
                      double h = 1e-5) {
  ad::Tape t;
  nn::TapeBinding b = nn::bind(t, ps);
  ad::Var loss = build(t, b);
  t.backward(loss);
  std::vector<nn::Mat> g = nn::collect_grads(t, b);
  double worst = 0.0;
  for (size_t i = 0; i < ps.count(); ++i) {
    nn::Mat& val = ps.at(static_cast<int>(i)).value;
    for (int r = 0; r < val.rows(); ++r) {
      for (int c = 0; c < val.cols(); ++c) {
        double keep = val(r, c);
        val(r, c) = keep + h;
        double up = eval_scalar(ps, build);
        val(r, c) = keep - h;
        double dn = eval_scalar(ps, build);
        val(r, c) = keep;
        double fd = (up - dn) / (2.0 * h);
        double an = g[i](r, c);
        double denom = std::max({1.0, std::abs(fd), std::abs(an)});
        worst = std::max(worst, std::abs(fd - an) / denom);
      }
    }
  }
  return worst;
}

nn::Mat random_mat(int rows, int cols, Rng& rng, double scale = 1.0) {
  nn::Mat m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = scale * rng.normal();
  return m;
}

}  // namespace

TEST_CASE("closed-form oracle suite") {
  auto t0 = std::chrono::steady_clock::now();
  bool pass = true;
  auto expect = [&](bool ok) {
    pass = pass && ok;
    CHECK(ok);
  };

  // propagation
  {
    PathLossConstants c;
    expect(rel_ok(c.gamma_los, 4.4668359215096305e-05));
    expect(rel_ok(c.eta_nlos, c.gamma_los * 1e-2));
    c.gamma_los = 1.0;
    c.eta_nlos = 0.5;
    c.alpha = 2.0;
    expect(rel_ok(path_loss(2.0, true, c), 0.25));
    expect(rel_ok(path_loss(2.0, false, c), 0.125));
  }
  {
    ArrayGeometry g4 = ArrayGeometry::ura(4, 0.0857);
    Direction d{kPi / 3, kPi / 5};
    expect(rel_ok(array_gain(steering_vector(d, g4), d, g4), 4.0));
    ArrayGeometry g1 = ArrayGeometry::ura(1, 0.0857);
    expect(rel_ok(array_gain(steering_vector(d, g1), d, g1), 1.0));
    Eigen::VectorXcd wz = steering_vector({0.0, 0.0}, g4);
    for (int m = 0; m < 4; ++m) {
      expect(rel_ok(wz(m).real(), 0.5));
      expect(std::abs(wz(m).imag()) < 1e-12);
    }
  }

  // radio
  {
    NoiseModel n;
    expect(rel_ok(noise_power(n, 180e3), 1.380649e-23 * 290.0 * 180e3));
  }
  {
    PerRbRadioState s;
    s.p_uav = Eigen::Vector2d(10.0, 10.0);
    s.p_jam = Eigen::Vector2d(0.0, 3.0);
    s.p_interf = Eigen::Vector2d(0.0, 5.0);
    s.p_noise = Eigen::Vector2d(2.0, 2.0);
    Eigen::VectorXd sinr = sinr_per_rb(s);
    expect(rel_ok(sinr(0), 5.0));
    expect(rel_ok(sinr(1), 1.0));

    PerRbRadioState one;
    one.p_uav = Eigen::VectorXd::Constant(1, 1.0);
    one.p_jam = Eigen::VectorXd::Constant(1, 1.0);
    one.p_interf = Eigen::VectorXd::Constant(1, 0.0);
    one.p_noise = Eigen::VectorXd::Constant(1, 0.1);
    NotchVector half{Eigen::VectorXd::Constant(1, 0.5), 1.0};
    expect(rel_ok(apply_notching(one, half)(0), 0.5 / 0.6));

    PerRbRadioState two;
    two.p_uav = Eigen::Vector2d(1.0, 2.0);
    two.p_jam = Eigen::Vector2d(0.5, 0.0);
    two.p_interf = Eigen::Vector2d(0.0, 0.0);
    two.p_noise = Eigen::Vector2d(0.1, 0.1);
    Indicators ind =
        measure_indicators(two, Eigen::VectorXd::Constant(2, 0.25));
    expect(rel_ok(ind.rssi_w, 3.7));
    expect(rel_ok(ind.rsrp_w, 0.25));
  }

  // link abstraction
  {
    EsmConfig cfg;
    cfg.beta_eesm = 1.0;
    Eigen::VectorXd two(2);
    two << 1.0, 0.0;
    expect(rel_ok(effective_sinr(two, cfg),
                  -std::log((std::exp(-1.0) + 1.0) / 2.0)));
    cfg.bler_sinr50_db = 0.0;
    cfg.bler_slope = 1.0;
    expect(rel_ok(sinr_to_bler(db_to_linear(2.0), cfg),
                  1.0 / (1.0 + std::exp(2.0))));
    expect(rel_ok(sinr_to_bler(1.0, cfg), 0.5));
    expect(rel_ok(per_closed_form(0.1, 1, PerMode::kAsWritten), 0.19));
    expect(rel_ok(per_closed_form(0.1, 1, PerMode::kResidual), 0.01));

    BwpConfig mu3;
    mu3.index = 1;
    mu3.numerology = 3;
    mu3.bandwidth_hz = 50e6;
    mu3.n_rb = 32;
    mu3.slot_duration_s = 1e-3 / 8.0;
    TimingState t;
    t = update_timing(1.0, mu3, 0.0, t);
    expect(rel_ok(t.last_latency_s, 0.125e-3));
    BwpConfig mu2;
    TimingState t2;
    t2 = update_timing(4.0, mu2, 0.0, t2);
    expect(rel_ok(t2.last_latency_s, 1.0e-3));
  }

  // rewards and objective
  {
    RewardWeights w;
    NormalizedMetrics m;
    m.delivery = 1.0;
    m.sinr = 0.5;
    auto [r1, r2] = compute_rewards(m, w);
    expect(rel_ok(r2, 0.2));
    expect(std::abs(r1) < 1e-9);

    ObjectiveWeights ow;
    ow.phi = 1.0;
    ow.beta = 0.25;
    ow.mu = 0.5;
    ow.psi = 0.25;
    KpiRecord k;
    k.packet_loss = 0.2;
    k.attempts = 2.0;
    k.latency_s = 0.001;
    k.jitter_s = 0.0005;
    expect(rel_ok(eval_objective({k}, ow).value, 0.700625));
  }

  // rl scalar pieces
  {
    expect(rel_ok(rl::ppo_clip_objective(1.5, 1.0, 0.2), 1.2));
    expect(rel_ok(rl::ppo_clip_objective(0.5, -1.0, 0.2), -0.8));
    Eigen::VectorXd mu1 = Eigen::VectorXd::Zero(1);
    Eigen::VectorXd mu2 = Eigen::VectorXd::Constant(1, 1.0);
    Eigen::VectorXd sig = Eigen::VectorXd::Ones(1);
    expect(rel_ok(rl::kl_diag_gaussian(mu1, sig, mu2, sig), 0.5));
    Eigen::Vector2d p(0.5, 0.5), q(0.9, 0.1);
    expect(rel_ok(rl::kl_categorical(p, q),
                  0.5 * std::log(0.5 / 0.9) + 0.5 * std::log(0.5 / 0.1)));
    Eigen::Vector2d e(0.9, 0.1);
    expect(rel_ok(rl::categorical_entropy(e),
                  -(0.9 * std::log(0.9) + 0.1 * std::log(0.1))));
  }

  // detector pieces
  {
    detector::FeaturePipelineConfig w;
    w.window_len = 300;
    w.stride = 300;
    expect(detector::window_count(600, w) == 2);
    expect(w.feature_count() == 90);
    detector::FeaturePipelineConfig nl = w;
    nl.scenario = "nlos";
    expect(nl.feature_count() == 54);

    detector::DetectorLossConfig lc;
    lc.alpha_uncertainty = 0.1;
    nn::Mat flat = nn::Mat::Zero(3, 2);
    expect(rel_ok(detector::detector_loss_value(flat, {0, 1, 0}, lc),
                  0.9 * std::log(2.0)));
    nn::Mat lg(2, 2);
    lg << 0.7, -0.4, -1.1, 0.9;
    double ce = 0.0, ent = 0.0;
    for (int r = 0; r < 2; ++r) {
      double a = lg(r, 0), b = lg(r, 1);
      double z = std::log(std::exp(a) + std::exp(b));
      double pa = std::exp(a - z), pb = std::exp(b - z);
      ce += -(r == 0 ? (a - z) : (b - z));
      ent -= pa * std::log(pa) + pb * std::log(pb);
    }
    ce /= 2.0;
    ent /= 2.0;
    expect(rel_ok(detector::detector_loss_value(lg, {0, 1}, lc),
                  ce - 0.1 * ent));
  }

  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                              t0)
                    .count();
  expect(secs < 5.0);
  criterion_line(1, "closed-form oracle suite", pass, fmt(secs) + " s");
}

TEST_CASE("monte carlo harq matches the geometric closed forms") {
  auto t0 = std::chrono::steady_clock::now();
  const int n = 100000;
  bool pass = true;
  double worst_rate_sigma = 0.0, worst_att_sigma = 0.0;
  int cell = 0;
  for (double b : {0.1, 0.3, 0.5, 0.7, 0.9}) {
    for (int r : {0, 1, 2, 4}) {
      HarqConfig h;
      h.r_max = r;
      Rng rng(derive_seed(0x4A70u, "harq", static_cast<std::uint64_t>(cell)));
      ++cell;
      long long delivered = 0;
      double att_sum = 0.0;
      for (int i = 0; i < n; ++i) {
        HarqOutcome out = harq_episode(b, h, rng);
        delivered += out.delivered ? 1 : 0;
        att_sum += out.attempts;
      }
      double rate = static_cast<double>(delivered) / n;
      double mean_att = att_sum / n;

      double p = 1.0 - std::pow(b, r + 1);
      double ea = 0.0;
      for (int i = 0; i <= r; ++i) ea += std::pow(b, i);
      double ea2 = std::pow(b, r) * (r + 1.0) * (r + 1.0);
      for (int k = 1; k <= r; ++k)
        ea2 += std::pow(b, k - 1) * (1.0 - b) * k * k;
      double var_att = ea2 - ea * ea;

      double rate_sig = std::sqrt(p * (1.0 - p) / n);
      double att_sig = std::sqrt(std::max(var_att, 1e-300) / n);
      double rs = std::abs(rate - p) / rate_sig;
      double as = var_att > 0.0 ? std::abs(mean_att - ea) / att_sig : 0.0;
      worst_rate_sigma = std::max(worst_rate_sigma, rs);
      worst_att_sigma = std::max(worst_att_sigma, as);
      CHECK(rs <= 3.0);
      CHECK(as <= 3.0);
      pass = pass && rs <= 3.0 && as <= 3.0;
    }
  }
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                              t0)
                    .count();
  pass = pass && secs < 30.0;
  CHECK(secs < 30.0);
  criterion_line(2, "monte carlo harq vs closed forms", pass,
         "worst deviation " + fmt(worst_rate_sigma) + " sigma rate, " +
             fmt(worst_att_sigma) + " sigma attempts");
}

TEST_CASE("gradients match central finite differences") {
  double worst = 0.0;

  // plain mlp, squared-output loss
  for (int i = 0; i < 25; ++i) {
    Rng rng(derive_seed(0x6D1Au, "fd-mlp", static_cast<std::uint64_t>(i)));
    nn::ParamStore ps;
    nn::MlpSpec spec;
    spec.widths = {3, 5, 2};
    nn::Mlp mlp = nn::Mlp::create(ps, "m", spec, rng);
    nn::Mat x = random_mat(4, 3, rng);
    auto build = [&](ad::Tape& t, const nn::TapeBinding& b) {
      ad::Var y = mlp.forward(t, b, t.input(x));
      return t.mean_all(t.mul(y, y));
    };
    worst = std::max(worst, max_fd_rel_err(ps, build));
  }

  // policy log-prob and entropy, both head kinds at once
  for (int i = 0; i < 25; ++i) {
    Rng rng(derive_seed(0x6D1Bu, "fd-policy", static_cast<std::uint64_t>(i)));
    nn::ParamStore ps;
    policy::HeadSpec hs;
    hs.cat_sizes = {3, 2};
    hs.cont_dim = 2;
    policy::ActorNet net = policy::ActorNet::create(ps, "a", 3, {6}, hs, rng);
    nn::Mat obs = random_mat(3, 3, rng);
    std::vector<std::vector<int>> cats = {
        {rng.uniform_int(3), rng.uniform_int(3), rng.uniform_int(3)},
        {rng.uniform_int(2), rng.uniform_int(2), rng.uniform_int(2)}};
    nn::Mat pre = random_mat(3, 2, rng, 0.7);
    auto build = [&](ad::Tape& t, const nn::TapeBinding& b) {
      policy::LogpEntropy le =
          policy::logp_entropy(t, b, net, t.input(obs), cats, pre);
      return t.add(t.mean_all(le.logp), t.scale(t.mean_all(le.entropy), 0.37));
    };
    worst = std::max(worst, max_fd_rel_err(ps, build));
  }

  // ppo clipped surrogate, rows kept away from the clip kinks
  for (int i = 0; i < 25; ++i) {
    Rng rng(derive_seed(0x6D1Cu, "fd-clip", static_cast<std::uint64_t>(i)));
    nn::ParamStore ps;
    policy::HeadSpec hs;
    hs.cat_sizes = {3};
    hs.cont_dim = 1;
    policy::ActorNet net = policy::ActorNet::create(ps, "a", 3, {5}, hs, rng);
    nn::Mat obs = random_mat(4, 3, rng);
    std::vector<std::vector<int>> cats = {{rng.uniform_int(3),
                                           rng.uniform_int(3),
                                           rng.uniform_int(3),
                                           rng.uniform_int(3)}};
    nn::Mat pre = random_mat(4, 1, rng, 0.7);
    nn::Mat lp_now(4, 1);
    {
      ad::Tape t;
      nn::TapeBinding b = nn::bind(t, ps);
      lp_now = t.val(
          policy::logp_entropy(t, b, net, t.input(obs), cats, pre).logp);
    }
    nn::Mat lp_old(4, 1), adv(4, 1);
    for (int r = 0; r < 4; ++r) {
      double ratio = 1.0, gap = 0.0;
      do {
        gap = rng.uniform(-0.45, 0.45);
        ratio = std::exp(gap);
      } while (std::abs(ratio - 0.8) < 2e-2 || std::abs(ratio - 1.2) < 2e-2);
      lp_old(r, 0) = lp_now(r, 0) - gap;
      double a = rng.uniform(0.2, 1.5);
      adv(r, 0) = rng.uniform() < 0.5 ? a : -a;
    }
    auto build = [&](ad::Tape& t, const nn::TapeBinding& b) {
      policy::LogpEntropy le =
          policy::logp_entropy(t, b, net, t.input(obs), cats, pre);
      ad::Var ratio = t.exp_(t.sub(le.logp, t.input(lp_old)));
      ad::Var adv_in = t.input(adv);
      ad::Var surr = t.min_(t.mul(ratio, adv_in),
                            t.mul(t.clip_const(ratio, 0.8, 1.2), adv_in));
      return t.scale(t.mean_all(surr), -1.0);
    };
    worst = std::max(worst, max_fd_rel_err(ps, build));
  }

  // detector loss through the attention stack
  for (int i = 0; i < 25; ++i) {
    Rng rng(derive_seed(0x6D1Du, "fd-det", static_cast<std::uint64_t>(i)));
    nn::ParamStore ps;
    detector::DetectorSpec spec;
    spec.input_dim = 6;
    spec.encoder_widths = {4, 2};
    detector::DetectorNet net = detector::DetectorNet::create(ps, "d", spec,
                                                              rng);
    nn::Mat x = random_mat(3, 6, rng, 0.8);
    std::vector<int> labels = {rng.uniform_int(2), rng.uniform_int(2),
                               rng.uniform_int(2)};
    detector::DetectorLossConfig lc;
    lc.grad_accum_steps = 2;
    auto build = [&](ad::Tape& t, const nn::TapeBinding& b) {
      return detector::detector_loss(t, net.forward(t, b, t.input(x)), labels,
                                     lc);
    };
    worst = std::max(worst, max_fd_rel_err(ps, build));
  }

  bool pass = worst < 1e-4;
  CHECK(worst < 1e-4);
  criterion_line(3, "finite-difference gradient checks", pass,
         "max rel err " + fmt(worst) + " over 100 instances");
}

TEST_CASE("beam grid search beats isotropic and the learned beams follow") {
  // part 1: grid-search oracle on random geometries
  ScenarioConfig sc4 = battle_scenario();
  sc4.randomize_positions = true;
  JammerConfig park = sc4.jammers.at(0);
  park.strategy = JamStrategy::kNarrowband;
  park.center_hz = sc4.bwp0.center_hz;
  sc4.jammers = {park};
  ScenarioConfig sc1 = sc4;
  sc1.m_uav = 1;
  sc1.m_gnb = 1;

  int wins = 0;
  const int geoms = 50;
  double mean_gain = 0.0;
  for (int g = 0; g < geoms; ++g) {
    std::uint64_t seed =
        derive_seed(0xBEA3u, "beam-geom", static_cast<std::uint64_t>(g));
    Rng r4(seed), r1(seed);
    EpisodeRealization ep4 = draw_episode(sc4, r4);
    EpisodeRealization ep1 = draw_episode(sc1, r1);
    REQUIRE((ep4.uav_pos - ep1.uav_pos).norm() < 1e-12);

    double iso = probe_db(sc1, ep1, 0, BeamAngles{});
    BeamAngles best = best_grid_beams(sc4, ep4, 0);
    double gain = probe_db(sc4, ep4, 0, best) - iso;
    mean_gain += gain;
    if (gain >= 3.0) ++wins;
  }
  mean_gain /= geoms;
  bool oracle_ok = wins >= 45;
  CHECK(oracle_ok);

  // part 2: beams decoded from the trained policy on the evaluation preset
  const Campaign& c = campaign();
  ScenarioConfig sc_train = c.scenario;
  ScenarioConfig sc_iso = sc_train;
  sc_iso.m_uav = 1;
  sc_iso.m_gnb = 1;
  double learned_sum = 0.0, grid_sum = 0.0;
  for (size_t s = 0; s < c.seeds.size(); ++s) {
    const trainer::TrainResult& pol =
        c.runs.at(trainer::Variant::kMappo)[s];
    trainer::JammingTrainEnv env(sc_train, RewardWeights{}, nullptr);
    std::uint64_t env_seed = eval_env_seed(static_cast<int>(s), 0);
    std::vector<Eigen::VectorXd> obs = env.reset(env_seed);
    Rng act_rng(7);
    JointActionRaw raw;
    bool done = false;
    while (!done) {
      std::vector<policy::ActionSample> acts;
      for (int a = 0; a < env.n_agents(); ++a)
        acts.push_back(policy::sample_action(pol.actors[a], pol.store,
                                             obs[a].transpose(), act_rng,
                                             true));
      for (int h = 0; h < 5; ++h) raw.cats[h] = acts[0].cats[h];
      for (int d = 0; d < 4; ++d) raw.cont(d) = acts[1].squashed(d);
      trainer::TrainEnv::Out out = env.step(acts);
      obs = out.obs;
      done = out.done;
    }
    RecoveryAction act = decode_joint_action(raw, sc_train);

    Rng r4(env_seed), r1(env_seed);
    EpisodeRealization ep4 = draw_episode(sc_train, r4);
    EpisodeRealization ep1 = draw_episode(sc_iso, r1);
    double iso = probe_db(sc_iso, ep1, act.bwp_idx, BeamAngles{});
    BeamAngles best = best_grid_beams(sc_train, ep4, act.bwp_idx);
    learned_sum += probe_db(sc_train, ep4, act.bwp_idx, act.beams) - iso;
    grid_sum += probe_db(sc_train, ep4, act.bwp_idx, best) - iso;
  }
  double learned = learned_sum / c.seeds.size();
  double grid = grid_sum / c.seeds.size();
  bool learn_ok = learned >= 0.5 * grid;
  CHECK(learn_ok);

  criterion_line(4, "beam oracle and learned beam recovery", oracle_ok && learn_ok,
         std::to_string(wins) + "/50 geometries >= 3 dB (mean " +
             fmt(mean_gain) + " dB); learned " + fmt(learned) + " dB vs grid " +
             fmt(grid) + " dB");
}

TEST_CASE("detector-aided training converges first") {
  const Campaign& c = campaign();
  auto mean_level = [&](trainer::Variant v) {
    double acc = 0.0;
    for (const auto& run : c.runs.at(v))
      acc += epochs_to_level(run.curve);
    return acc / c.runs.at(v).size();
  };
  double det = mean_level(trainer::Variant::kMappoDet);
  double mappo = mean_level(trainer::Variant::kMappo);
  double ippo = mean_level(trainer::Variant::kIppo);
  bool pass = det < mappo && mappo <= ippo + 1e-12;
  CHECK(pass);
  criterion_line(5, "epochs to 90% of improvement: det < mappo <= ippo", pass,
         "det " + fmt(det) + ", mappo " + fmt(mappo) + ", ippo " + fmt(ippo));
}

TEST_CASE("low packet loss fraction orders det, mappo, random") {
  const Campaign& c = campaign();
  auto frac = [&](trainer::Variant v, const detector::DetectorRuntime* det) {
    double acc = 0.0;
    for (size_t s = 0; s < c.seeds.size(); ++s)
      acc += eval_policy(&c.runs.at(v)[s], det, static_cast<int>(s), false)
                 .frac_low;
    return acc / c.seeds.size();
  };
  double det = frac(trainer::Variant::kMappoDet, c.det.get());
  double mappo = frac(trainer::Variant::kMappo, nullptr);
  double rnd = 0.0;
  for (size_t s = 0; s < c.seeds.size(); ++s)
    rnd += eval_policy(nullptr, nullptr, static_cast<int>(s), true).frac_low;
  rnd /= c.seeds.size();

  bool pass = det >= mappo + 0.03 && mappo >= rnd + 0.03;
  CHECK(pass);
  criterion_line(6, "fraction of slots with loss < 0.2", pass,
         "det " + fmt(det) + ", mappo " + fmt(mappo) + ", random " + fmt(rnd));
}

TEST_CASE("detector-aided policy has the lowest mean latency") {
  const Campaign& c = campaign();
  auto lat = [&](trainer::Variant v, const detector::DetectorRuntime* det) {
    double acc = 0.0;
    for (size_t s = 0; s < c.seeds.size(); ++s)
      acc += eval_policy(&c.runs.at(v)[s], det, static_cast<int>(s), false)
                 .mean_latency;
    return acc / c.seeds.size();
  };
  double det = lat(trainer::Variant::kMappoDet, c.det.get());
  double mappo = lat(trainer::Variant::kMappo, nullptr);
  double ippo = lat(trainer::Variant::kIppo, nullptr);
  bool pass = det <= mappo && det <= ippo;
  CHECK(pass);
  criterion_line(7, "mean evaluation latency: det lowest", pass,
         "det " + fmt(det * 1e3) + " ms, mappo " + fmt(mappo * 1e3) +
             " ms, ippo " + fmt(ippo * 1e3) + " ms");
}

TEST_CASE("training is bit-reproducible end to end") {
  config::AppConfig cfg;
  cfg.scenario = battle_scenario();
  cfg.scenario.episode_slots = 12;
  cfg.trainer = battle_trainer();
  cfg.trainer.epochs = 3;
  cfg.run.variant = "mappo";
  cfg.run.seed = 4242;
  cfg.evaluate.episodes = 2;

  fs::path a = fresh_dir("jamshield_acc_det_a");
  fs::path b = fresh_dir("jamshield_acc_det_b");
  REQUIRE(pipeline::run_train(cfg, a.string()) == 0);
  REQUIRE(pipeline::run_evaluate(cfg, a.string()) == 0);
  REQUIRE(pipeline::run_train(cfg, b.string()) == 0);
  REQUIRE(pipeline::run_evaluate(cfg, b.string()) == 0);

  bool pass = true;
  for (const char* f :
       {"checkpoint.bin", "curve.csv", "kpi_eval_ep0.csv", "kpi_eval_ep1.csv"}) {
    bool same = slurp_bytes(a / f) == slurp_bytes(b / f);
    CHECK(same);
    pass = pass && same;
  }
  criterion_line(8, "identical train and evaluate runs are byte-equal", pass, "");
}

TEST_CASE("detector accuracy, feature counts, and logit stability") {
  const Campaign& c = campaign();
  const detector::DetectorModel& model = c.det->model();
  bool acc_ok = model.val_accuracy >= 0.9;
  CHECK(acc_ok);

  detector::FeaturePipelineConfig los;
  detector::FeaturePipelineConfig nlos;
  nlos.scenario = "nlos";
  bool feat_ok = los.feature_count() == 90 && nlos.feature_count() == 54;
  CHECK(feat_ok);

  int w = c.det->window_len();
  Rng rng(5150);
  bool stable = true;
  for (int trial = 0; trial < 3; ++trial) {
    std::vector<double> rssi(w), sinr(w);
    for (int i = 0; i < w; ++i) {
      rssi[i] = rng.uniform(-120.0, -60.0);
      sinr[i] = rng.uniform(-10.0, 40.0);
    }
    auto [l1a, l2a] = c.det->score(rssi, sinr);
    auto [l1b, l2b] = c.det->score(rssi, sinr);
    detector::DetectorRuntime copy(model);
    auto [l1c, l2c] = copy.score(rssi, sinr);
    stable = stable && l1a == l1b && l2a == l2b && l1a == l1c && l2a == l2c;
  }
  CHECK(stable);

  bool pass = acc_ok && feat_ok && stable;
  criterion_line(9, "detector accuracy / feature counts / logit stability", pass,
         "val accuracy " + fmt(model.val_accuracy));
}

TEST_CASE("packet loss under a random policy grows with attacker power") {
  ScenarioConfig base;
  base.jammers = {JammerConfig{}};
  const int seeds = 20;
  std::vector<double> powers = {0.0, 2.0, 5.0, 10.0};
  std::vector<double> losses;
  for (double p : powers) {
    ScenarioConfig sc = base;
    sc.jammers[0].tx_power_dbm = p;
    double acc = 0.0;
    long long slots = 0;
    for (int s = 0; s < seeds; ++s) {
      trainer::JammingTrainEnv env(sc, RewardWeights{}, nullptr);
      pipeline::RolloutResult rr = pipeline::rollout(
          env, nullptr, pipeline::RolloutPolicy::kRandom,
          derive_seed(0x57E5u, "stress-env", static_cast<std::uint64_t>(s)),
          derive_seed(0x57E6u, "stress-act", static_cast<std::uint64_t>(s)),
          false);
      for (const auto& k : rr.kpis) {
        acc += k.packet_loss;
        ++slots;
      }
    }
    losses.push_back(acc / slots);
  }
  bool pass = true;
  std::string detail;
  for (size_t i = 0; i < losses.size(); ++i) {
    if (i > 0) pass = pass && losses[i] >= losses[i - 1];
    detail += (i ? ", " : "") + fmt(powers[i]) + " dBm: " + fmt(losses[i]);
  }
  CHECK(pass);
  criterion_line(10, "mean packet loss non-decreasing in attacker power", pass,
         detail);
}
