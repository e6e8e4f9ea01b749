#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <memory>

#include "jamshield/trainer.hpp"

using namespace jamshield;
using trainer::Trainer;
using trainer::TrainerConfig;
using trainer::TrainEnv;
using trainer::TrainResult;
using trainer::Variant;

namespace {

// Single agent, two arms, arm 0 pays 1 per step. Obs is a constant so the
// policy has to learn a pure bias preference.
class BanditEnv : public TrainEnv {
 public:
  explicit BanditEnv(int len = 8) : len_(len) {}
  int n_agents() const override { return 1; }
  policy::HeadSpec head_spec(int) const override {
    policy::HeadSpec h;
    h.cat_sizes = {2};
    return h;
  }
  int obs_dim(int) const override { return 1; }
  std::vector<Eigen::VectorXd> reset(std::uint64_t) override {
    t_ = 0;
    return {Eigen::VectorXd::Ones(1)};
  }
  Out step(const std::vector<policy::ActionSample>& acts) override {
    ++t_;
    Out o;
    o.obs = {Eigen::VectorXd::Ones(1)};
    o.rewards = {acts[0].cats[0] == 0 ? 1.0 : 0.0};
    o.done = t_ >= len_;
    return o;
  }

 private:
  int len_;
  int t_ = 0;
};

// Two agents with identical three-arm heads but opposing preferred arms, so a
// cross-policy divergence penalty has matched distributions to act on.
class TugEnv : public TrainEnv {
 public:
  int n_agents() const override { return 2; }
  policy::HeadSpec head_spec(int) const override {
    policy::HeadSpec h;
    h.cat_sizes = {3};
    return h;
  }
  int obs_dim(int) const override { return 2; }
  std::vector<Eigen::VectorXd> reset(std::uint64_t seed) override {
    rng_ = Rng(seed);
    t_ = 0;
    return {draw(), draw()};
  }
  Out step(const std::vector<policy::ActionSample>& acts) override {
    ++t_;
    Out o;
    o.rewards = {acts[0].cats[0] == 0 ? 1.0 : 0.0,
                 acts[1].cats[0] == 1 ? 1.0 : 0.0};
    o.obs = {draw(), draw()};
    o.done = t_ >= 6;
    return o;
  }

 private:
  Eigen::VectorXd draw() {
    Eigen::VectorXd v(2);
    v << rng_.uniform(), 1.0;
    return v;
  }
  Rng rng_{0};
  int t_ = 0;
};

TrainerConfig small_cfg() {
  TrainerConfig cfg;
  cfg.hidden = {8};
  cfg.lr_start = 3e-3;
  cfg.lr_end = 3e-4;
  cfg.batch_start = 8;
  cfg.batch_end = 16;
  cfg.episodes_per_iter = 2;
  cfg.epochs = 30;
  return cfg;
}

bool stores_match(nn::ParamStore& a, nn::ParamStore& b) {
  if (a.count() != b.count()) return false;
  for (int i = 0; i < static_cast<int>(a.count()); ++i) {
    if (a.at(i).name != b.at(i).name) return false;
    const nn::Mat& x = a.at(i).value;
    const nn::Mat& y = b.at(i).value;
    if (x.rows() != y.rows() || x.cols() != y.cols()) return false;
    for (int r = 0; r < x.rows(); ++r)
      for (int c = 0; c < x.cols(); ++c)
        if (x(r, c) != y(r, c)) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("variant names round trip") {
  for (Variant v : {Variant::kIppo, Variant::kMappo, Variant::kMappoDet})
    CHECK(trainer::variant_from_string(trainer::to_string(v)) == v);
  CHECK(trainer::to_string(Variant::kMappoDet) == "mappo-det");
  CHECK_THROWS_AS(trainer::variant_from_string("qmix"), ConfigError);
}

TEST_CASE("trainer config validation") {
  TrainerConfig cfg;
  CHECK_NOTHROW(cfg.validate());

  cfg = TrainerConfig{};
  cfg.gamma = 1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);

  cfg = TrainerConfig{};
  cfg.clip_eps = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);

  cfg = TrainerConfig{};
  cfg.kl_chi = -0.1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);

  cfg = TrainerConfig{};
  cfg.lr_end = cfg.lr_start * 10.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);

  cfg = TrainerConfig{};
  cfg.batch_end = cfg.batch_start - 1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);

  cfg = TrainerConfig{};
  cfg.hidden = {16, 0};
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("worker cap follows the thread env var") {
  unsetenv("JAMSHIELD_THREADS");
  CHECK(trainer::worker_cap() == 1);
  setenv("JAMSHIELD_THREADS", "3", 1);
  CHECK(trainer::worker_cap() == 3);
  setenv("JAMSHIELD_THREADS", "0", 1);
  CHECK(trainer::worker_cap() == 1);
  setenv("JAMSHIELD_THREADS", "junk", 1);
  CHECK(trainer::worker_cap() == 1);
  unsetenv("JAMSHIELD_THREADS");
}

TEST_CASE("network builder wires critic inputs per variant") {
  TugEnv probe;
  TrainerConfig cfg = small_cfg();

  TrainResult ind = trainer::build_networks(probe, cfg, Variant::kIppo, 5);
  TrainResult cen = trainer::build_networks(probe, cfg, Variant::kMappo, 5);
  REQUIRE(ind.actors.size() == 2);
  REQUIRE(ind.critics.size() == 2);

  // independent critic consumes one observation, central one the joint row
  ad::Tape ti;
  nn::TapeBinding bi = nn::bind(ti, ind.store);
  ad::Var vi = ind.critics[0].forward(ti, bi, ti.input(nn::Mat::Zero(3, 2)));
  CHECK(ti.val(vi).cols() == 1);
  CHECK_THROWS_AS(
      ind.critics[0].forward(ti, bi, ti.input(nn::Mat::Zero(3, 4))),
      std::domain_error);

  ad::Tape tc;
  nn::TapeBinding bc = nn::bind(tc, cen.store);
  ad::Var vc = cen.critics[0].forward(tc, bc, tc.input(nn::Mat::Zero(3, 4)));
  CHECK(tc.val(vc).cols() == 1);
  CHECK_THROWS_AS(
      cen.critics[0].forward(tc, bc, tc.input(nn::Mat::Zero(3, 2))),
      std::domain_error);

  // same seed must rebuild the exact same parameter layout and values
  TrainResult again = trainer::build_networks(probe, cfg, Variant::kIppo, 5);
  CHECK(stores_match(ind.store, again.store));
}

TEST_CASE("a two-armed bandit is solved within the budget across seeds") {
  for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
    TrainerConfig cfg = small_cfg();
    cfg.epochs = 200;
    Trainer tr(cfg, Variant::kIppo,
               [] { return std::make_unique<BanditEnv>(); }, seed);
    TrainResult res = tr.run();
    REQUIRE(static_cast<int>(res.curve.size()) == cfg.epochs);

    double tail = 0.0;
    for (int i = cfg.epochs - 10; i < cfg.epochs; ++i)
      tail += res.curve[i].mean_return;
    tail /= 10.0;
    INFO("seed " << seed << " tail return " << tail);
    CHECK(tail >= 0.95 * 8.0);

    Eigen::RowVectorXd obs = Eigen::RowVectorXd::Ones(1);
    Rng rng(99);
    policy::ActionSample det =
        policy::sample_action(res.actors[0], res.store, obs, rng, true);
    CHECK(det.cats[0] == 0);
  }
}

TEST_CASE("same seed reproduces the whole run bit for bit") {
  auto run_once = [] {
    TrainerConfig cfg = small_cfg();
    cfg.epochs = 10;
    Trainer tr(cfg, Variant::kMappo,
               [] { return std::make_unique<TugEnv>(); }, 424242);
    return tr.run();
  };
  TrainResult a = run_once();
  TrainResult b = run_once();
  CHECK(stores_match(a.store, b.store));
  REQUIRE(a.curve.size() == b.curve.size());
  for (size_t i = 0; i < a.curve.size(); ++i) {
    REQUIRE(a.curve[i].agent_returns.size() == b.curve[i].agent_returns.size());
    for (size_t j = 0; j < a.curve[i].agent_returns.size(); ++j)
      CHECK(a.curve[i].agent_returns[j] == b.curve[i].agent_returns[j]);
    CHECK(a.curve[i].lr == b.curve[i].lr);
    CHECK(a.curve[i].batch == b.curve[i].batch);
  }
}

TEST_CASE("training result is invariant to the worker pool size") {
  auto run_with = [](const char* threads) {
    if (threads)
      setenv("JAMSHIELD_THREADS", threads, 1);
    else
      unsetenv("JAMSHIELD_THREADS");
    TrainerConfig cfg = small_cfg();
    cfg.epochs = 8;
    cfg.episodes_per_iter = 4;
    Trainer tr(cfg, Variant::kMappo,
               [] { return std::make_unique<TugEnv>(); }, 777);
    TrainResult res = tr.run();
    unsetenv("JAMSHIELD_THREADS");
    return res;
  };
  TrainResult solo = run_with(nullptr);
  TrainResult pooled = run_with("3");
  CHECK(stores_match(solo.store, pooled.store));
  for (size_t i = 0; i < solo.curve.size(); ++i)
    CHECK(solo.curve[i].mean_return == pooled.curve[i].mean_return);
}

TEST_CASE("central and independent critics coincide for one agent") {
  auto run_variant = [](Variant v) {
    TrainerConfig cfg = small_cfg();
    cfg.epochs = 12;
    Trainer tr(cfg, v, [] { return std::make_unique<BanditEnv>(); }, 31337);
    return tr.run();
  };
  TrainResult ippo = run_variant(Variant::kIppo);
  TrainResult mappo = run_variant(Variant::kMappo);
  CHECK(stores_match(ippo.store, mappo.store));
  for (size_t i = 0; i < ippo.curve.size(); ++i)
    CHECK(ippo.curve[i].mean_return == mappo.curve[i].mean_return);
}

TEST_CASE("divergence coupling changes the learned parameters") {
  auto run_chi = [](double chi) {
    TrainerConfig cfg = small_cfg();
    cfg.epochs = 10;
    cfg.kl_chi = chi;
    Trainer tr(cfg, Variant::kMappo,
               [] { return std::make_unique<TugEnv>(); }, 11);
    return tr.run();
  };
  TrainResult plain = run_chi(0.0);
  TrainResult coupled = run_chi(0.8);
  CHECK_FALSE(stores_match(plain.store, coupled.store));
  for (const auto& cp : coupled.curve)
    for (double r : cp.agent_returns) CHECK(std::isfinite(r));
}

TEST_CASE("jamming adapter exposes the contracted action space") {
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

  trainer::JammingTrainEnv env(sc, RewardWeights{}, nullptr);
  CHECK(env.n_agents() == 2);
  CHECK(env.obs_dim(0) == 3);
  CHECK(env.obs_dim(1) == 3);

  policy::HeadSpec s1 = env.head_spec(0);
  REQUIRE(s1.cat_sizes.size() == 5);
  CHECK(s1.cat_sizes[0] == 64);  // widest band's resource blocks
  CHECK(s1.cat_sizes[1] == sc.notch_max + 1);
  CHECK(s1.cat_sizes[2] == 2);
  CHECK(s1.cat_sizes[3] == 2);
  CHECK(s1.cat_sizes[4] == sc.r_max_limit + 1);
  CHECK(s1.cont_dim == 0);

  policy::HeadSpec s2 = env.head_spec(1);
  CHECK(s2.cat_sizes.empty());
  CHECK(s2.cont_dim == 4);

  std::vector<Eigen::VectorXd> obs = env.reset(5);
  REQUIRE(obs.size() == 2);
  CHECK(obs[0].size() == 3);
  CHECK(obs[1].size() == 3);

  std::vector<policy::ActionSample> acts(2);
  acts[0].cats = {0, 0, 1, 0, 2};
  acts[1].pre_squash = Eigen::VectorXd::Zero(4);
  acts[1].squashed = Eigen::VectorXd::Zero(4);
  TrainEnv::Out out = env.step(acts);
  REQUIRE(out.rewards.size() == 2);
  CHECK(out.rewards[0] >= -1.0);
  CHECK(out.rewards[0] <= 1.0);
  CHECK(out.rewards[1] >= -1.0);
  CHECK(out.rewards[1] <= 1.0);
  CHECK_FALSE(out.done);
  CHECK(out.obs[0].size() == 3);
}

TEST_CASE("a short run on the jamming environment stays finite") {
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

  TrainerConfig cfg = small_cfg();
  cfg.epochs = 3;
  Trainer tr(cfg, Variant::kMappo,
             [sc] { return std::make_unique<trainer::JammingTrainEnv>(
                 sc, RewardWeights{}, nullptr); },
             2024);
  TrainResult res = tr.run();
  REQUIRE(res.curve.size() == 3);
  for (const auto& cp : res.curve) {
    REQUIRE(cp.agent_returns.size() == 2);
    for (double r : cp.agent_returns) {
      CHECK(std::isfinite(r));
      CHECK(r >= -6.0);
      CHECK(r <= 6.0);
    }
  }
}
