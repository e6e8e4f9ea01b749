#pragma once

#include <atomic>
#include <cstdlib>
#include <functional>
#include <memory>
#include <numeric>
#include <string>
#include <thread>
#include <vector>

#include "jamshield/common.hpp"
#include "jamshield/env.hpp"
#include "jamshield/nn.hpp"
#include "jamshield/policy.hpp"
#include "jamshield/rl.hpp"

namespace jamshield::trainer {

enum class Variant { kIppo, kMappo, kMappoDet };

inline std::string to_string(Variant v) {
  switch (v) {
    case Variant::kIppo: return "ippo";
    case Variant::kMappo: return "mappo";
    case Variant::kMappoDet: return "mappo-det";
  }
  return "?";
}

inline Variant variant_from_string(const std::string& s) {
  if (s == "ippo") return Variant::kIppo;
  if (s == "mappo") return Variant::kMappo;
  if (s == "mappo-det") return Variant::kMappoDet;
  throw ConfigError("unknown variant '" + s + "'");
}

struct TrainerConfig {
  double gamma = 0.95;
  double clip_eps = 0.2;
  double kl_chi = 0.0;
  double gae_lambda = 0.95;
  double lr_start = 1e-3;
  double lr_end = 1e-5;
  int batch_start = 32;
  int batch_end = 256;
  int epochs = 400;
  int episodes_per_iter = 2;
  int ppo_epochs = 3;
  double entropy_coef = 0.01;
  double value_coef = 0.5;
  double max_grad_norm = 0.5;
  std::vector<int> hidden = {64, 64};
  bool value_norm = true;

  void validate() const {
    if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("trainer.gamma must lie in [0,1)");
    if (!(clip_eps > 0.0 && clip_eps < 1.0))
      throw ConfigError("trainer.clip_eps must lie in (0,1)");
    if (kl_chi < 0.0) throw ConfigError("trainer.kl_chi must be >= 0");
    if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0))
      throw ConfigError("trainer.gae_lambda must lie in [0,1]");
    if (lr_start <= 0.0 || lr_end <= 0.0 || lr_end > lr_start)
      throw ConfigError("trainer learning-rate schedule must decay");
    if (batch_start < 1 || batch_end < batch_start)
      throw ConfigError("trainer batch schedule must grow");
    if (epochs < 1) throw ConfigError("trainer.epochs must be >= 1");
    if (episodes_per_iter < 1)
      throw ConfigError("trainer.episodes_per_iter must be >= 1");
    if (ppo_epochs < 1) throw ConfigError("trainer.ppo_epochs must be >= 1");
    if (entropy_coef < 0.0) throw ConfigError("trainer.entropy_coef must be >= 0");
    if (value_coef < 0.0) throw ConfigError("trainer.value_coef must be >= 0");
    if (max_grad_norm < 0.0) throw ConfigError("trainer.max_grad_norm must be >= 0");
    for (int h : hidden)
      if (h < 1) throw ConfigError("trainer.hidden widths must be >= 1");
  }
};

// Minimal multi-agent episodic environment the trainer can drive.
class TrainEnv {
 public:
  struct Out {
    std::vector<Eigen::VectorXd> obs;
    std::vector<double> rewards;
    bool done = false;
  };

  virtual ~TrainEnv() = default;
  virtual int n_agents() const = 0;
  virtual policy::HeadSpec head_spec(int agent) const = 0;
  virtual int obs_dim(int agent) const = 0;
  virtual std::vector<Eigen::VectorXd> reset(std::uint64_t seed) = 0;
  virtual Out step(const std::vector<policy::ActionSample>& actions) = 0;
};

inline int worker_cap() {
  const char* e = std::getenv("JAMSHIELD_THREADS");
  if (!e) return 1;
  int v = std::atoi(e);
  return v >= 1 ? v : 1;
}

struct CurvePoint {
  int iter = 0;
  double lr = 0.0;
  int batch = 0;
  std::vector<double> agent_returns;
  double mean_return = 0.0;
};

struct TrainResult {
  nn::ParamStore store;
  std::vector<policy::ActorNet> actors;
  std::vector<nn::Mlp> critics;
  std::vector<CurvePoint> curve;
  Variant variant = Variant::kIppo;
  TrainerConfig config;
};

// Fresh actor/critic stacks in a deterministic parameter order; checkpoint
// loading reuses this to rebuild the exact same store layout.
inline TrainResult build_networks(TrainEnv& probe, const TrainerConfig& cfg,
                                  Variant variant, std::uint64_t master_seed) {
  const int n = probe.n_agents();
  const bool central = variant != Variant::kIppo;
  TrainResult res;
  res.variant = variant;
  res.config = cfg;
  Rng init_rng(derive_seed(master_seed, "init", 0));
  int joint_dim = 0;
  for (int a = 0; a < n; ++a) joint_dim += probe.obs_dim(a);
  for (int a = 0; a < n; ++a) {
    res.actors.push_back(policy::ActorNet::create(
        res.store, "actor" + std::to_string(a), probe.obs_dim(a), cfg.hidden,
        probe.head_spec(a), init_rng));
    nn::MlpSpec cs;
    cs.widths.push_back(central ? joint_dim : probe.obs_dim(a));
    for (int h : cfg.hidden) cs.widths.push_back(h);
    cs.widths.push_back(1);
    res.critics.push_back(
        nn::Mlp::create(res.store, "critic" + std::to_string(a), cs, init_rng));
  }
  return res;
}

namespace detail {

inline int total_dim(TrainEnv& env) {
  int s = 0;
  for (int a = 0; a < env.n_agents(); ++a) s += env.obs_dim(a);
  return s;
}

struct EpisodeData {
  // per agent
  std::vector<nn::Mat> obs;
  std::vector<std::vector<std::vector<int>>> cat_actions;  // [agent][head][t]
  std::vector<nn::Mat> pre_squash;
  std::vector<Eigen::VectorXd> rewards;
  nn::Mat joint_obs;
  std::vector<double> returns_sum;
};

inline EpisodeData collect_episode(TrainEnv& env,
                                   const std::vector<policy::ActorNet>& actors,
                                   const nn::ParamStore& store,
                                   std::uint64_t env_seed,
                                   std::uint64_t act_seed) {
  const int n = env.n_agents();
  std::vector<Eigen::VectorXd> obs = env.reset(env_seed);
  Rng act_rng(act_seed);

  EpisodeData d;
  d.obs.resize(n);
  d.cat_actions.resize(n);
  d.pre_squash.resize(n);
  d.rewards.resize(n);
  d.returns_sum.assign(n, 0.0);
  std::vector<std::vector<Eigen::RowVectorXd>> obs_rows(n);
  std::vector<std::vector<Eigen::RowVectorXd>> joint_rows;
  std::vector<std::vector<double>> rew(n);
  for (int a = 0; a < n; ++a)
    d.cat_actions[a].resize(actors[a].heads.cat_sizes.size());
  std::vector<std::vector<Eigen::RowVectorXd>> pre_rows(n);

  bool done = false;
  while (!done) {
    std::vector<policy::ActionSample> acts(n);
    Eigen::RowVectorXd joint(total_dim(env));
    int off = 0;
    for (int a = 0; a < n; ++a) {
      Eigen::RowVectorXd row = obs[a].transpose();
      obs_rows[a].push_back(row);
      joint.segment(off, row.size()) = row;
      off += static_cast<int>(row.size());
      acts[a] = policy::sample_action(actors[a], store, row, act_rng);
    }
    joint_rows.push_back({joint});
    TrainEnv::Out out = env.step(acts);
    for (int a = 0; a < n; ++a) {
      for (size_t h = 0; h < actors[a].heads.cat_sizes.size(); ++h)
        d.cat_actions[a][h].push_back(acts[a].cats[h]);
      if (actors[a].heads.cont_dim > 0)
        pre_rows[a].push_back(acts[a].pre_squash.transpose());
      rew[a].push_back(out.rewards[a]);
      d.returns_sum[a] += out.rewards[a];
    }
    obs = out.obs;
    done = out.done;
  }

  const int T = static_cast<int>(rew[0].size());
  for (int a = 0; a < n; ++a) {
    d.obs[a].resize(T, obs_rows[a][0].size());
    for (int t = 0; t < T; ++t) d.obs[a].row(t) = obs_rows[a][t];
    if (!pre_rows[a].empty()) {
      d.pre_squash[a].resize(T, pre_rows[a][0].size());
      for (int t = 0; t < T; ++t) d.pre_squash[a].row(t) = pre_rows[a][t];
    } else {
      d.pre_squash[a].resize(T, 0);
    }
    d.rewards[a] = Eigen::Map<Eigen::VectorXd>(rew[a].data(), T);
  }
  d.joint_obs.resize(T, joint_rows[0][0].size());
  for (int t = 0; t < T; ++t) d.joint_obs.row(t) = joint_rows[t][0];
  return d;
}

}  // namespace detail

class Trainer {
 public:
  Trainer(TrainerConfig cfg, Variant variant,
          std::function<std::unique_ptr<TrainEnv>()> env_factory,
          std::uint64_t master_seed)
      : cfg_(cfg),
        variant_(variant),
        factory_(std::move(env_factory)),
        seed_(master_seed) {
    cfg_.validate();
  }

  TrainResult run() {
    std::unique_ptr<TrainEnv> probe = factory_();
    const int n = probe->n_agents();

    TrainResult res = build_networks(*probe, cfg_, variant_, seed_);

    nn::Adam adam(res.store);
    std::vector<rl::RunningMeanStd> ret_norm(n);
    long long episode_counter = 0;

    for (int iter = 0; iter < cfg_.epochs; ++iter) {
      double lr = nn::geometric_lr(cfg_.lr_start, cfg_.lr_end, iter, cfg_.epochs);
      int mb_size = nn::batch_size_at(cfg_.batch_start, cfg_.batch_end, iter,
                                      cfg_.epochs);

      // rollout collection, merged in episode order
      std::vector<detail::EpisodeData> eps(cfg_.episodes_per_iter);
      int workers = std::min(worker_cap(), cfg_.episodes_per_iter);
      if (workers <= 1) {
        for (int e = 0; e < cfg_.episodes_per_iter; ++e)
          eps[e] = collect_one(res, episode_counter + e);
      } else {
        std::vector<std::thread> pool;
        std::atomic<int> next{0};
        for (int w = 0; w < workers; ++w)
          pool.emplace_back([&] {
            while (true) {
              int e = next.fetch_add(1);
              if (e >= cfg_.episodes_per_iter) break;
              eps[e] = collect_one(res, episode_counter + e);
            }
          });
        for (auto& th : pool) th.join();
      }
      episode_counter += cfg_.episodes_per_iter;

      CurvePoint cp;
      cp.iter = iter;
      cp.lr = lr;
      cp.batch = mb_size;
      cp.agent_returns.assign(n, 0.0);
      for (const auto& e : eps)
        for (int a = 0; a < n; ++a) cp.agent_returns[a] += e.returns_sum[a];
      for (int a = 0; a < n; ++a) {
        cp.agent_returns[a] /= cfg_.episodes_per_iter;
        cp.mean_return += cp.agent_returns[a] / n;
      }
      res.curve.push_back(cp);

      update(res, eps, ret_norm, adam, lr, mb_size,
             derive_seed(seed_, "update", static_cast<std::uint64_t>(iter)));
    }
    return res;
  }

 private:
  detail::EpisodeData collect_one(TrainResult& res, long long ep_idx) {
    std::unique_ptr<TrainEnv> env = factory_();
    return detail::collect_episode(
        *env, res.actors, res.store,
        derive_seed(seed_, "env-episode", static_cast<std::uint64_t>(ep_idx)),
        derive_seed(seed_, "act-episode", static_cast<std::uint64_t>(ep_idx)));
  }

  struct AgentBatch {
    nn::Mat obs;
    nn::Mat critic_in;
    std::vector<std::vector<int>> cat_actions;
    nn::Mat pre_squash;
    Eigen::VectorXd rewards;
    Eigen::VectorXd logp_old;
    Eigen::VectorXd advantages;
    Eigen::VectorXd returns;
  };

  void update(TrainResult& res, const std::vector<detail::EpisodeData>& eps,
              std::vector<rl::RunningMeanStd>& ret_norm, nn::Adam& adam,
              double lr, int mb_size, std::uint64_t update_seed) {
    const int n = static_cast<int>(res.actors.size());
    const bool central = variant_ != Variant::kIppo;

    int total_rows = 0;
    std::vector<int> ep_start;
    for (const auto& e : eps) {
      ep_start.push_back(total_rows);
      total_rows += static_cast<int>(e.rewards[0].size());
    }

    std::vector<AgentBatch> batch(n);
    for (int a = 0; a < n; ++a) {
      AgentBatch& b = batch[a];
      b.obs.resize(total_rows, eps[0].obs[a].cols());
      b.critic_in.resize(total_rows,
                         central ? eps[0].joint_obs.cols() : eps[0].obs[a].cols());
      b.pre_squash.resize(total_rows, eps[0].pre_squash[a].cols());
      b.rewards.resize(total_rows);
      b.cat_actions.resize(res.actors[a].heads.cat_sizes.size());
      int r = 0;
      for (const auto& e : eps) {
        int T = static_cast<int>(e.rewards[a].size());
        b.obs.middleRows(r, T) = e.obs[a];
        b.critic_in.middleRows(r, T) = central ? e.joint_obs : e.obs[a];
        if (b.pre_squash.cols() > 0)
          b.pre_squash.middleRows(r, T) = e.pre_squash[a];
        b.rewards.segment(r, T) = e.rewards[a];
        for (size_t h = 0; h < b.cat_actions.size(); ++h)
          b.cat_actions[h].insert(b.cat_actions[h].end(),
                                  e.cat_actions[a][h].begin(),
                                  e.cat_actions[a][h].end());
        r += T;
      }
    }

    // frozen-policy quantities for the whole batch
    for (int a = 0; a < n; ++a) {
      ad::Tape t;
      nn::TapeBinding bind = nn::bind(t, res.store);
      ad::Var obs_in = t.input(batch[a].obs);
      policy::LogpEntropy le = policy::logp_entropy(
          t, bind, res.actors[a], obs_in, batch[a].cat_actions,
          batch[a].pre_squash);
      batch[a].logp_old = t.val(le.logp).col(0);

      ad::Var vin = t.input(batch[a].critic_in);
      ad::Var v = res.critics[a].forward(t, bind, vin);
      Eigen::VectorXd v_norm = t.val(v).col(0);
      Eigen::VectorXd values(v_norm.size());
      for (int i = 0; i < v_norm.size(); ++i)
        values(i) = cfg_.value_norm ? ret_norm[a].denormalize(v_norm(i))
                                    : v_norm(i);

      batch[a].advantages.resize(total_rows);
      batch[a].returns.resize(total_rows);
      for (size_t e = 0; e < eps.size(); ++e) {
        int start = ep_start[e];
        int T = static_cast<int>(eps[e].rewards[a].size());
        rl::GaeResult g = rl::compute_gae(
            batch[a].rewards.segment(start, T), values.segment(start, T), 0.0,
            cfg_.gamma, cfg_.gae_lambda);
        batch[a].advantages.segment(start, T) = g.advantages;
        batch[a].returns.segment(start, T) = g.returns;
      }
      if (cfg_.value_norm) ret_norm[a].update_batch(batch[a].returns);
      rl::standardize(batch[a].advantages);
    }

    Rng shuffle_rng(update_seed);
    std::vector<int> idx(total_rows);
    std::iota(idx.begin(), idx.end(), 0);

    for (int pe = 0; pe < cfg_.ppo_epochs; ++pe) {
      for (int i = total_rows - 1; i > 0; --i)
        std::swap(idx[i], idx[shuffle_rng.uniform_int(i + 1)]);
      for (int start = 0; start < total_rows; start += mb_size) {
        int count = std::min(mb_size, total_rows - start);
        std::vector<int> rows(idx.begin() + start, idx.begin() + start + count);
        minibatch_step(res, batch, ret_norm, rows, adam, lr);
      }
    }
  }

  static nn::Mat take_rows(const nn::Mat& m, const std::vector<int>& rows) {
    nn::Mat out(rows.size(), m.cols());
    for (size_t i = 0; i < rows.size(); ++i) out.row(i) = m.row(rows[i]);
    return out;
  }

  void minibatch_step(TrainResult& res, const std::vector<AgentBatch>& batch,
                      const std::vector<rl::RunningMeanStd>& ret_norm,
                      const std::vector<int>& rows, nn::Adam& adam, double lr) {
    const int n = static_cast<int>(res.actors.size());
    const int B = static_cast<int>(rows.size());
    ad::Tape t;
    nn::TapeBinding bind = nn::bind(t, res.store);

    ad::Var loss = t.input(nn::Mat::Zero(1, 1));
    std::vector<policy::LogpEntropy> les(n);
    for (int a = 0; a < n; ++a) {
      const AgentBatch& b = batch[a];
      std::vector<std::vector<int>> cats(b.cat_actions.size());
      for (size_t h = 0; h < cats.size(); ++h) {
        cats[h].reserve(B);
        for (int r : rows) cats[h].push_back(b.cat_actions[h][r]);
      }
      nn::Mat pre(B, b.pre_squash.cols());
      for (int i = 0; i < B; ++i)
        if (pre.cols() > 0) pre.row(i) = b.pre_squash.row(rows[i]);
      nn::Mat lp_old(B, 1), adv(B, 1), ret(B, 1);
      for (int i = 0; i < B; ++i) {
        lp_old(i, 0) = b.logp_old(rows[i]);
        adv(i, 0) = b.advantages(rows[i]);
        double rt = b.returns(rows[i]);
        ret(i, 0) = cfg_.value_norm ? ret_norm[a].normalize(rt) : rt;
      }

      ad::Var obs_in = t.input(take_rows(b.obs, rows));
      les[a] = policy::logp_entropy(t, bind, res.actors[a], obs_in, cats, pre);
      ad::Var ratio = t.exp_(t.sub(les[a].logp, t.input(lp_old)));
      ad::Var adv_in = t.input(adv);
      ad::Var surr = t.min_(
          t.mul(ratio, adv_in),
          t.mul(t.clip_const(ratio, 1.0 - cfg_.clip_eps, 1.0 + cfg_.clip_eps),
                adv_in));
      loss = t.add(loss, t.scale(t.mean_all(surr), -1.0));
      loss = t.add(loss,
                   t.scale(t.mean_all(les[a].entropy), -cfg_.entropy_coef));

      ad::Var vin = t.input(take_rows(b.critic_in, rows));
      ad::Var v = res.critics[a].forward(t, bind, vin);
      ad::Var verr = t.sub(v, t.input(ret));
      loss = t.add(loss,
                   t.scale(t.mean_all(t.mul(verr, verr)), cfg_.value_coef));
    }

    if (cfg_.kl_chi > 0.0 && n >= 2) {
      for (int a = 0; a < n; ++a)
        for (int b2 = 0; b2 < n; ++b2) {
          if (a == b2) continue;
          ad::Var kl = policy::kl_matched_heads(t, les[a], les[b2],
                                                res.actors[a].heads,
                                                res.actors[b2].heads);
          loss = t.add(loss, t.scale(t.mean_all(kl), cfg_.kl_chi));
        }
    }

    t.backward(loss);
    std::vector<nn::Mat> grads = nn::collect_grads(t, bind);
    nn::clip_grads(grads, cfg_.max_grad_norm);
    adam.step(res.store, grads, lr);
  }

  TrainerConfig cfg_;
  Variant variant_;
  std::function<std::unique_ptr<TrainEnv>()> factory_;
  std::uint64_t seed_;
};

// Adapter exposing the jamming environment through the trainer interface.
class JammingTrainEnv : public TrainEnv {
 public:
  JammingTrainEnv(ScenarioConfig sc, RewardWeights rw,
                  const LogitSource* detector)
      : env_(std::move(sc), rw, detector) {
    const ScenarioConfig& s = env_.scenario();
    int rb_head = std::max(s.bwp0.n_rb, s.bwp1.n_rb);
    spec1_.cat_sizes = {rb_head, s.notch_max + 1, 2, 2, s.r_max_limit + 1};
    spec2_.cont_dim = 4;
  }

  int n_agents() const override { return 2; }

  policy::HeadSpec head_spec(int agent) const override {
    return agent == 0 ? spec1_ : spec2_;
  }

  int obs_dim(int) const override { return env_.obs_dim(); }

  std::vector<Eigen::VectorXd> reset(std::uint64_t seed) override {
    AgentObs o = env_.reset(seed);
    return {o.a1, o.a2};
  }

  Out step(const std::vector<policy::ActionSample>& actions) override {
    JointActionRaw raw;
    for (int h = 0; h < 5; ++h) raw.cats[h] = actions[0].cats[h];
    for (int d = 0; d < 4; ++d) raw.cont(d) = actions[1].squashed(d);
    StepResult sr = env_.step(raw);
    Out out;
    out.obs = {sr.obs.a1, sr.obs.a2};
    out.rewards = {sr.r1, sr.r2};
    out.done = sr.done;
    return out;
  }

  JammingEnv& env() { return env_; }

 private:
  JammingEnv env_;
  policy::HeadSpec spec1_, spec2_;
};

}  // namespace jamshield::trainer
