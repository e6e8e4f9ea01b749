#include <catch2/catch_amalgamated.hpp>

#include "jamshield/env.hpp"

using namespace jamshield;

namespace {
ScenarioConfig small_scenario() {
  ScenarioConfig sc;
  sc.num_gnb = 1;
  sc.jammers.clear();
  sc.los_mode = LosMode::kForceLos;
  sc.disable_shadowing = true;
  sc.randomize_positions = false;
  sc.episode_slots = 6;
  sc.packets_per_slot = 4;
  sc.m_uav = 1;
  sc.m_gnb = 1;
  return sc;
}

struct FixedLogits : LogitSource {
  std::pair<double, double> score(const std::vector<double>&,
                                  const std::vector<double>&) const override {
    return {1.5, -0.5};
  }
  int window_len() const override { return 10; }
};
}  // namespace

TEST_CASE("reward weighting closed forms") {
  RewardWeights w;
  NormalizedMetrics zero;
  auto [r1z, r2z] = compute_rewards(zero, w);
  CHECK(r1z == -1.0);
  CHECK(r2z == -1.0);

  NormalizedMetrics one;
  one.delivery = one.sinr = one.rssi = one.rsrp = one.latency = one.jitter = 1.0;
  auto [r1o, r2o] = compute_rewards(one, w);
  CHECK(r1o == 1.0);
  CHECK(r2o == 1.0);

  NormalizedMetrics m;
  m.delivery = 1.0;
  m.sinr = 0.5;
  m.rsrp = 0.0;
  auto [r1, r2] = compute_rewards(m, w);
  CHECK(r2 == Catch::Approx(0.2).epsilon(1e-12));  // 2*(.4+.2)-1
  CHECK(r1 == Catch::Approx(0.0).margin(1e-12));   // 2*(.4+.1)-1

  NormalizedMetrics bad;
  bad.delivery = 1.5;
  CHECK_THROWS_AS(compute_rewards(bad, w), std::domain_error);
}

TEST_CASE("rewards stay in the unit band for any metric mix") {
  RewardWeights w;
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    NormalizedMetrics m;
    m.delivery = rng.uniform();
    m.sinr = rng.uniform();
    m.rssi = rng.uniform();
    m.rsrp = rng.uniform();
    m.latency = rng.uniform();
    m.jitter = rng.uniform();
    auto [r1, r2] = compute_rewards(m, w);
    CHECK(r1 >= -1.0);
    CHECK(r1 <= 1.0);
    CHECK(r2 >= -1.0);
    CHECK(r2 <= 1.0);
  }
}

TEST_CASE("reward weights must sum to one per agent") {
  RewardWeights w;
  w.a1_delivery = 0.9;
  CHECK_THROWS_AS(w.validate(), ConfigError);
  w = RewardWeights{};
  w.a2_rsrp = -0.2;
  w.a2_sinr = 0.8;
  CHECK_THROWS_AS(w.validate(), ConfigError);
  CHECK_NOTHROW(RewardWeights{}.validate());
}

TEST_CASE("normalization tracker prior, widening and inversion") {
  NormalizationTracker t(0.0, 10.0, false);
  CHECK(t.normalize(0.0) == 0.0);
  CHECK(t.normalize(10.0) == 1.0);
  CHECK(t.normalize(5.0) == Catch::Approx(0.5));
  CHECK(t.normalize(20.0) == 1.0);  // widens the range...
  CHECK(t.max_seen() == 20.0);
  CHECK(t.normalize(10.0) == Catch::Approx(0.5));  // ...and rescales

  NormalizationTracker inv(0.0, 10.0, true);
  CHECK(inv.normalize(0.0) == 1.0);
  CHECK(inv.normalize(10.0) == 0.0);
  CHECK(inv.normalize(2.5) == Catch::Approx(0.75));

  Rng rng(5);
  NormalizationTracker wide(-1.0, 1.0, false);
  for (int i = 0; i < 300; ++i) {
    double v = wide.normalize(rng.uniform(-50.0, 50.0));
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
  CHECK_THROWS_AS(NormalizationTracker(1.0, 1.0, false), ConfigError);
}

TEST_CASE("evaluation objective weighted sum") {
  ObjectiveWeights w;
  w.phi = 1.0;
  w.beta = 0.25;
  w.mu = 0.5;
  w.psi = 0.25;
  KpiRecord k;
  k.packet_loss = 0.2;
  k.attempts = 2.0;
  k.latency_s = 0.001;
  k.jitter_s = 0.0005;
  EvalObjectiveResult r = eval_objective({k}, w);
  CHECK(r.value == Catch::Approx(0.700625).epsilon(1e-12));
  CHECK(r.latency_ok);
  CHECK(r.jitter_ok);
  CHECK(r.notch_ok);

  // all-zero KPIs score zero
  EvalObjectiveResult z = eval_objective({KpiRecord{}}, w);
  CHECK(z.value == Catch::Approx(0.25).epsilon(1e-12));  // attempts default 1

  // constraint flags trip past their bounds
  k.latency_s = 0.1;
  k.jitter_s = 0.05;
  EvalObjectiveResult bad = eval_objective({k}, w, 99.0);
  CHECK_FALSE(bad.latency_ok);
  CHECK_FALSE(bad.jitter_ok);
  CHECK_FALSE(bad.notch_ok);

  CHECK_THROWS_AS(eval_objective({}, w), std::domain_error);
}

TEST_CASE("objective averages over slots") {
  ObjectiveWeights w;
  w.phi = 1.0;
  w.beta = 0.0;
  w.mu = 0.0;
  w.psi = 0.0;
  KpiRecord lossless;
  lossless.attempts = 1.0;
  KpiRecord lossy = lossless;
  lossy.packet_loss = 1.0;
  EvalObjectiveResult r = eval_objective({lossless, lossy}, w);
  CHECK(r.value == Catch::Approx(0.5));
}

TEST_CASE("angle decoding covers the spans") {
  CHECK(angle_from_unit(-1.0, kPi) == 0.0);
  CHECK(angle_from_unit(0.0, kPi) == Catch::Approx(kPi / 2));
  CHECK(angle_from_unit(1.0, kPi) == Catch::Approx(kPi));
  CHECK(angle_from_unit(0.0, 2.0 * kPi) == Catch::Approx(kPi));
  // full azimuth span wraps back to zero
  CHECK(angle_from_unit(1.0, 2.0 * kPi) == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("joint action decoding clamps out-of-range picks") {
  ScenarioConfig sc = small_scenario();
  JointActionRaw raw;
  raw.cats = {10, 100, 1, 0, 2};
  RecoveryAction a = decode_joint_action(raw, sc);
  CHECK(a.bwp_idx == 0);
  CHECK(a.rb_start == 10);
  CHECK(a.rb_num == std::min(sc.notch_max, sc.bwp0.n_rb - 10));
  CHECK(a.r_max == 2);

  raw.cats = {999, 5, 1, 1, 9};
  a = decode_joint_action(raw, sc);
  CHECK(a.rb_start == sc.bwp1.n_rb - 1);
  CHECK(a.rb_num == 0);  // out-of-range start collapses the window
  CHECK(a.r_max == sc.r_max_limit);

  raw.cats = {0, 0, 0, 0, 0};
  raw.cont = {0.0, 0.0, 0.0, 0.0};
  a = decode_joint_action(raw, sc);
  CHECK(a.beams.theta_uav == Catch::Approx(kPi / 2));
  CHECK(a.beams.phi_uav == Catch::Approx(kPi));
  CHECK(a.beams.theta_gnb == Catch::Approx(kPi / 2));
  CHECK(a.beams.phi_gnb == Catch::Approx(kPi));

  raw.cont(0) = std::nan("");
  CHECK_THROWS_AS(decode_joint_action(raw, sc), EpisodeError);
}

TEST_CASE("episode steps are deterministic under a fixed seed") {
  ScenarioConfig sc = small_scenario();
  JammerConfig j;
  j.position = {600.0, 600.0, 1.5};
  sc.jammers.push_back(j);

  JammingEnv e1(sc), e2(sc);
  e1.reset(77);
  e2.reset(77);
  JointActionRaw raw;
  raw.cats = {4, 3, 1, 0, 1};
  for (int s = 0; s < sc.episode_slots; ++s) {
    StepResult a = e1.step(raw);
    StepResult b = e2.step(raw);
    CHECK(a.kpi.sinr_eff == b.kpi.sinr_eff);
    CHECK(a.kpi.packet_loss == b.kpi.packet_loss);
    CHECK(a.kpi.rssi_w == b.kpi.rssi_w);
    CHECK(a.r1 == b.r1);
    CHECK(a.r2 == b.r2);
    CHECK(a.obs.a1 == b.obs.a1);
    CHECK(a.obs.a2 == b.obs.a2);
    CHECK(a.done == (s == sc.episode_slots - 1));
  }
  CHECK_FALSE(e1.active());
  CHECK_THROWS_AS(e1.step(raw), EpisodeError);
  CHECK(e1.kpis().size() == static_cast<size_t>(sc.episode_slots));
}

TEST_CASE("observation layout with and without a detector") {
  ScenarioConfig sc = small_scenario();
  JammingEnv plain(sc);
  CHECK(plain.obs_dim() == 3);
  AgentObs o = plain.reset(5);
  CHECK(o.a1.size() == 3);
  CHECK(o.a2.size() == 3);

  FixedLogits det;
  JammingEnv with(sc, RewardWeights{}, &det);
  CHECK(with.obs_dim() == 5);
  with.reset(5);
  StepResult r = with.step(JointActionRaw{});
  REQUIRE(r.obs.a1.size() == 5);
  CHECK(r.obs.a1(3) == 1.5);
  CHECK(r.obs.a1(4) == -0.5);
  CHECK(r.obs.a2(3) == 1.5);
  CHECK(r.kpi.l1 == 1.5);
  CHECK(r.kpi.l2 == -0.5);
}

TEST_CASE("notching every rb kills the slot") {
  ScenarioConfig sc = small_scenario();
  sc.notch_max = sc.bwp0.n_rb;  // allow a full-band notch
  JammingEnv env(sc);
  env.reset(3);
  JointActionRaw raw;
  raw.cats = {0, sc.bwp0.n_rb, 1, 0, 2};
  StepResult r = env.step(raw);
  CHECK(r.kpi.sinr_eff == 0.0);
  CHECK(r.kpi.packet_loss == 1.0);
  CHECK(env.mean_notch_rbs() == Catch::Approx(sc.bwp0.n_rb));
}

TEST_CASE("a clean strong link delivers everything") {
  ScenarioConfig sc = small_scenario();
  sc.uav_tx_power_dbm = 30.0;
  sc.disable_fading = true;
  sc.esm.bler_sinr50_db = -10.0;
  JammingEnv env(sc);
  env.reset(9);
  JointActionRaw raw;
  raw.cats = {0, 0, 0, 0, 2};
  StepResult r = env.step(raw);
  CHECK(r.kpi.packet_loss == 0.0);
  CHECK(r.kpi.attempts == 1.0);
  CHECK(r.kpi.sinr_eff > db_to_linear(20.0));
}

TEST_CASE("bwp switch and beam moves cost latency") {
  ScenarioConfig sc = small_scenario();
  sc.uav_tx_power_dbm = 30.0;
  sc.disable_fading = true;
  sc.esm.bler_sinr50_db = -10.0;
  JammingEnv env(sc);
  env.reset(4);

  JointActionRaw stay;
  stay.cats = {0, 0, 0, 0, 0};
  double lat0 = env.step(stay).kpi.latency_s;
  CHECK(lat0 == Catch::Approx(sc.bwp0.slot_duration_s).epsilon(1e-9));

  // same action again: no penalty
  CHECK(env.step(stay).kpi.latency_s == Catch::Approx(lat0).epsilon(1e-9));

  JointActionRaw hop = stay;
  hop.cats[3] = 1;
  double lat1 = env.step(hop).kpi.latency_s;
  CHECK(lat1 == Catch::Approx(sc.bwp1.slot_duration_s +
                              sc.penalties.bwp_switch_s)
                    .epsilon(1e-9));

  JointActionRaw steer = hop;
  steer.cont(1) = 0.5;
  double lat2 = env.step(steer).kpi.latency_s;
  CHECK(lat2 == Catch::Approx(sc.bwp1.slot_duration_s +
                              sc.penalties.beam_update_s)
                    .epsilon(1e-9));
}

TEST_CASE("jammer-free link beats a jammed one") {
  ScenarioConfig quiet = small_scenario();
  quiet.disable_fading = true;
  JammingEnv clean(quiet);
  clean.reset(11);

  ScenarioConfig noisy = quiet;
  JammerConfig j;
  j.position = {520.0, 520.0, 1.5};
  j.tx_power_dbm = 10.0;
  noisy.jammers.push_back(j);
  JammingEnv jammed(noisy);
  jammed.reset(11);

  JointActionRaw raw;
  raw.cats = {0, 0, 0, 0, 2};
  double sinr_clean = clean.step(raw).kpi.sinr_eff;
  double sinr_jam = jammed.step(raw).kpi.sinr_eff;
  CHECK(sinr_jam < sinr_clean);
}

TEST_CASE("probe sinr prefers the matched beam") {
  ScenarioConfig sc = small_scenario();
  sc.m_uav = 4;
  sc.m_gnb = 4;
  sc.disable_fading = true;
  Rng rng(21);
  EpisodeRealization ep = draw_episode(sc, rng);
  Direction dep = direction_between(ep.uav_pos, ep.serving_gnb_pos);
  Direction arr = direction_between(ep.serving_gnb_pos, ep.uav_pos);
  BeamAngles matched{dep.theta, dep.phi, arr.theta, arr.phi};
  BeamAngles away{0.1, 4.0, 0.1, 4.0};
  CHECK(probe_effective_sinr(sc, ep, 0, matched) >
        probe_effective_sinr(sc, ep, 0, away));
}
