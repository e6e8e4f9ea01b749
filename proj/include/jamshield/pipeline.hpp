#pragma once

#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "jamshield/checkpoint.hpp"
#include "jamshield/config.hpp"
#include "jamshield/detector.hpp"
#include "jamshield/env.hpp"
#include "jamshield/io.hpp"
#include "jamshield/report.hpp"
#include "jamshield/trainer.hpp"

namespace jamshield::pipeline {

namespace fs = std::filesystem;

inline constexpr const char* kToolVersion = "1.0.0";

namespace detail {

inline std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

inline std::map<std::string, std::string> parse_kv(const std::string& echo) {
  std::map<std::string, std::string> out;
  std::stringstream ss(echo);
  std::string tok;
  while (std::getline(ss, tok, ';')) {
    size_t eq = tok.find('=');
    if (eq == std::string::npos) continue;
    out[tok.substr(0, eq)] = tok.substr(eq + 1);
  }
  return out;
}

inline std::vector<int> parse_int_list(std::string s) {
  std::vector<int> out;
  std::erase(s, '[');
  std::erase(s, ']');
  std::erase(s, ' ');
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ','))
    if (!tok.empty()) out.push_back(std::stoi(tok));
  return out;
}

inline double kv_num(const std::map<std::string, std::string>& kv,
                     const std::string& key, double def) {
  auto it = kv.find(key);
  return it == kv.end() ? def : std::stod(it->second);
}

inline int kv_int(const std::map<std::string, std::string>& kv,
                  const std::string& key, int def) {
  auto it = kv.find(key);
  return it == kv.end() ? def : std::stoi(it->second);
}

inline std::string kv_str(const std::map<std::string, std::string>& kv,
                          const std::string& key, const std::string& def) {
  auto it = kv.find(key);
  return it == kv.end() ? def : it->second;
}

}  // namespace detail

// ---- policy checkpoints ----

inline ckpt::Checkpoint policy_to_checkpoint(const trainer::TrainResult& res) {
  return ckpt::from_store(
      res.store,
      config::trainer_config_echo(res.config, trainer::to_string(res.variant)));
}

inline std::pair<trainer::TrainerConfig, trainer::Variant> parse_trainer_echo(
    const std::string& echo) {
  auto kv = detail::parse_kv(echo);
  trainer::TrainerConfig t;
  trainer::Variant v =
      trainer::variant_from_string(detail::kv_str(kv, "variant", "mappo"));
  t.gamma = detail::kv_num(kv, "gamma", t.gamma);
  t.clip_eps = detail::kv_num(kv, "clip_eps", t.clip_eps);
  t.kl_chi = detail::kv_num(kv, "kl_chi", t.kl_chi);
  t.gae_lambda = detail::kv_num(kv, "gae_lambda", t.gae_lambda);
  t.lr_start = detail::kv_num(kv, "lr_start", t.lr_start);
  t.lr_end = detail::kv_num(kv, "lr_end", t.lr_end);
  t.batch_start = detail::kv_int(kv, "batch_start", t.batch_start);
  t.batch_end = detail::kv_int(kv, "batch_end", t.batch_end);
  t.epochs = detail::kv_int(kv, "epochs", t.epochs);
  t.episodes_per_iter = detail::kv_int(kv, "episodes_per_iter", t.episodes_per_iter);
  t.ppo_epochs = detail::kv_int(kv, "ppo_epochs", t.ppo_epochs);
  t.entropy_coef = detail::kv_num(kv, "entropy_coef", t.entropy_coef);
  t.value_coef = detail::kv_num(kv, "value_coef", t.value_coef);
  t.max_grad_norm = detail::kv_num(kv, "max_grad_norm", t.max_grad_norm);
  if (kv.count("hidden")) t.hidden = detail::parse_int_list(kv.at("hidden"));
  t.value_norm = detail::kv_str(kv, "value_norm", "true") == "true";
  return {t, v};
}

inline trainer::TrainResult policy_from_checkpoint(const ckpt::Checkpoint& ck,
                                                   trainer::TrainEnv& probe) {
  auto [cfg, variant] = parse_trainer_echo(ck.config_echo);
  trainer::TrainResult res = trainer::build_networks(probe, cfg, variant, 0);
  ckpt::into_store(ck, res.store);
  return res;
}

// ---- detector checkpoints ----

inline ckpt::Checkpoint detector_to_checkpoint(const detector::DetectorModel& m) {
  std::ostringstream echo;
  const auto& pc = m.pipeline.config();
  echo << "window_len=" << pc.window_len << ";stride=" << pc.stride
       << ";pca_components=" << pc.pca_components << ";scenario=" << pc.scenario
       << ";heads=" << m.net.spec().heads << ";encoder=[";
  for (size_t i = 0; i < m.net.spec().encoder_widths.size(); ++i)
    echo << (i ? "," : "") << m.net.spec().encoder_widths[i];
  echo << "];val_accuracy=" << m.val_accuracy
       << ";margin_benign=" << m.margin_benign << ";margin_jam=" << m.margin_jam;
  ckpt::Checkpoint ck = ckpt::from_store(m.store, echo.str());
  const auto& groups = m.pipeline.groups();
  for (size_t g = 0; g < groups.size(); ++g) {
    std::string base = "pca.g" + std::to_string(g);
    ck.tensors.push_back({base + ".mean", groups[g].mean});
    ck.tensors.push_back({base + ".basis", groups[g].basis});
    ck.tensors.push_back({base + ".var", groups[g].variances});
  }
  return ck;
}

inline detector::DetectorModel detector_from_checkpoint(
    const ckpt::Checkpoint& ck) {
  auto kv = detail::parse_kv(ck.config_echo);
  detector::FeaturePipelineConfig pc;
  pc.window_len = detail::kv_int(kv, "window_len", pc.window_len);
  pc.stride = detail::kv_int(kv, "stride", pc.stride);
  pc.pca_components = detail::kv_int(kv, "pca_components", pc.pca_components);
  pc.scenario = detail::kv_str(kv, "scenario", pc.scenario);

  detector::DetectorModel m;
  m.pipeline = detector::FeaturePipeline(pc);
  auto& groups = m.pipeline.groups_mutable();
  for (int g = 0; g < 2 * detector::kNumTransforms; ++g) {
    std::string base = "pca.g" + std::to_string(g);
    detector::Pca p;
    p.mean = ck.tensor(base + ".mean").row(0);
    p.basis = ck.tensor(base + ".basis");
    p.variances = ck.tensor(base + ".var").col(0);
    groups.push_back(std::move(p));
  }

  detector::DetectorSpec spec;
  spec.input_dim = pc.feature_count();
  spec.heads = detail::kv_int(kv, "heads", spec.heads);
  if (kv.count("encoder"))
    spec.encoder_widths = detail::parse_int_list(kv.at("encoder"));
  Rng rng(0);
  m.net = detector::DetectorNet::create(m.store, "det", spec, rng);
  ckpt::into_store(ck, m.store);
  m.val_accuracy = detail::kv_num(kv, "val_accuracy", 0.0);
  m.margin_benign = detail::kv_num(kv, "margin_benign", 0.0);
  m.margin_jam = detail::kv_num(kv, "margin_jam", 0.0);
  return m;
}

// ---- rollouts ----

inline policy::ActionSample random_action(const policy::HeadSpec& spec,
                                          Rng& rng) {
  policy::ActionSample a;
  for (int s : spec.cat_sizes) a.cats.push_back(rng.uniform_int(s));
  a.pre_squash.resize(spec.cont_dim);
  a.squashed.resize(spec.cont_dim);
  for (int d = 0; d < spec.cont_dim; ++d) {
    a.pre_squash(d) = rng.normal();
    a.squashed(d) = std::tanh(a.pre_squash(d));
  }
  return a;
}

// Fixed do-nothing defense: first band, no notch, mid retransmission budget.
inline std::vector<policy::ActionSample> neutral_actions(
    trainer::JammingTrainEnv& env) {
  policy::ActionSample a0;
  a0.cats = {0, 0, 0, 0,
             std::min(2, env.env().scenario().r_max_limit)};
  a0.pre_squash = Eigen::VectorXd::Zero(0);
  a0.squashed = Eigen::VectorXd::Zero(0);
  policy::ActionSample a1;
  a1.pre_squash = Eigen::VectorXd::Zero(4);
  a1.squashed = Eigen::VectorXd::Zero(4);
  return {a0, a1};
}

struct RolloutResult {
  std::vector<KpiRecord> kpis;
  double mean_notch_rbs = 0.0;
  double return_a1 = 0.0;
  double return_a2 = 0.0;
};

enum class RolloutPolicy { kTrained, kRandom, kNeutral };

inline RolloutResult rollout(trainer::JammingTrainEnv& env,
                             const trainer::TrainResult* policy,
                             RolloutPolicy kind, std::uint64_t env_seed,
                             std::uint64_t act_seed, bool deterministic) {
  Rng act_rng(act_seed);
  std::vector<Eigen::VectorXd> obs_v = env.reset(env_seed);
  std::vector<Eigen::RowVectorXd> obs;
  for (const auto& o : obs_v) obs.push_back(o.transpose());
  RolloutResult out;
  bool done = false;
  while (!done) {
    std::vector<policy::ActionSample> acts;
    if (kind == RolloutPolicy::kTrained) {
      for (int a = 0; a < env.n_agents(); ++a)
        acts.push_back(policy::sample_action(policy->actors[a], policy->store,
                                             obs[a], act_rng, deterministic));
    } else if (kind == RolloutPolicy::kRandom) {
      for (int a = 0; a < env.n_agents(); ++a)
        acts.push_back(random_action(env.head_spec(a), act_rng));
    } else {
      acts = neutral_actions(env);
    }
    trainer::TrainEnv::Out so = env.step(acts);
    out.return_a1 += so.rewards[0];
    out.return_a2 += so.rewards[1];
    for (int a = 0; a < env.n_agents(); ++a) obs[a] = so.obs[a].transpose();
    done = so.done;
  }
  out.kpis = env.env().kpis();
  out.mean_notch_rbs = env.env().mean_notch_rbs();
  return out;
}

// ---- manifest ----

inline void write_manifest(const std::string& out_dir,
                           const std::string& command,
                           const config::AppConfig& cfg,
                           const std::vector<std::string>& outputs,
                           const std::vector<std::pair<std::string, std::string>>&
                               notes = {}) {
  nlohmann::json j;
  j["tool"] = "jamshield";
  j["version"] = kToolVersion;
  j["command"] = command;
  j["variant"] = cfg.run.variant;
  j["seed"] = cfg.run.seed;
  j["config_hash"] = detail::hex64(config::fnv1a(config::echo_toml(cfg)));
  std::vector<std::string> sorted = outputs;
  std::sort(sorted.begin(), sorted.end());
  j["outputs"] = sorted;
  for (const auto& [k, v] : notes) j[k] = v;
  io::write_text(out_dir + "/manifest.json", j.dump(2) + "\n");
}

// ---- detector training data from the simulator ----

inline std::vector<detector::LabeledWindow> detector_dataset(
    const config::AppConfig& cfg, std::uint64_t seed, int windows_per_episode) {
  const auto& pc = cfg.detector.train.pipeline;
  ScenarioConfig benign = cfg.scenario;
  benign.jammers.clear();
  ScenarioConfig attack = cfg.scenario;
  if (attack.jammers.empty()) attack.jammers.push_back(JammerConfig{});
  int slots = pc.window_len + pc.stride * (windows_per_episode - 1);
  benign.episode_slots = slots;
  attack.episode_slots = slots;

  // Attack windows are labeled by actual overlap with the band the neutral
  // rollout observes, so the off phases of a sweep stay in the benign class.
  std::vector<char> hot(slots, 0);
  for (int t = 0; t < slots; ++t)
    for (const auto& jc : attack.jammers) {
      JamWindow w =
          jam_window(jc, attack.carrier, attack.bwp0.rb_bandwidth_hz(), t);
      if (jam_occupancy(w, attack.bwp0).sum() > 0.0) {
        hot[t] = 1;
        break;
      }
    }

  std::vector<detector::LabeledWindow> data;
  for (int label = 0; label <= 1; ++label) {
    trainer::JammingTrainEnv env(label == 0 ? benign : attack, cfg.rewards,
                                 nullptr);
    for (int ep = 0; ep < cfg.detector.episodes_per_class; ++ep) {
      std::uint64_t env_seed = derive_seed(
          seed, label == 0 ? "det-benign" : "det-attack", ep);
      RolloutResult r = rollout(env, nullptr, RolloutPolicy::kNeutral, env_seed,
                                0, true);
      std::vector<double> rssi_dbm, sinr_db;
      for (const auto& k : r.kpis) {
        rssi_dbm.push_back(watts_to_dbm(std::max(k.rssi_w, 1e-30)));
        sinr_db.push_back(safe_db(k.sinr_eff));
      }
      for (int w = 0; w < windows_per_episode; ++w) {
        detector::LabeledWindow lw;
        lw.window = detector::FeaturePipeline::cut(rssi_dbm, sinr_db,
                                                   w * pc.stride, pc.window_len);
        lw.label = label;
        data.push_back(std::move(lw));
      }
    }
  }
  return data;
}

inline detector::DetectorModel train_detector_from_scenario(
    const config::AppConfig& cfg, std::uint64_t seed,
    int windows_per_episode = 4) {
  auto data = detector_dataset(cfg, seed, windows_per_episode);
  Rng rng(derive_seed(seed, "det-train", 0));
  return detector::train_detector(data, cfg.detector.train, rng);
}

// ---- commands ----

inline void write_config_echo(const config::AppConfig& cfg,
                              const std::string& out_dir) {
  io::write_text(out_dir + "/config_echo.toml", config::echo_toml(cfg));
}

inline int run_simulate(const config::AppConfig& cfg, const std::string& out) {
  io::ensure_dir(out);
  write_config_echo(cfg, out);
  trainer::JammingTrainEnv env(cfg.scenario, cfg.rewards, nullptr);
  std::vector<std::string> outputs = {"config_echo.toml", "manifest.json"};
  for (int ep = 0; ep < cfg.simulate.episodes; ++ep) {
    RolloutResult r =
        rollout(env, nullptr, RolloutPolicy::kRandom,
                derive_seed(cfg.run.seed, "sim-episode", ep),
                derive_seed(cfg.run.seed, "sim-action", ep), false);
    std::string name = "kpi_sim_ep" + std::to_string(ep) + ".csv";
    io::write_kpi_csv(out + "/" + name, r.kpis);
    outputs.push_back(name);
  }
  write_manifest(out, "simulate", cfg, outputs, {{"policy", "random"}});
  return 0;
}

inline int run_detect_train(const config::AppConfig& cfg,
                            const std::string& out) {
  io::ensure_dir(out);
  write_config_echo(cfg, out);
  detector::DetectorModel model = train_detector_from_scenario(
      cfg, derive_seed(cfg.run.seed, "detector", 0));
  ckpt::save(out + "/detector.bin", detector_to_checkpoint(model));
  std::ostringstream metrics;
  metrics << "val_accuracy,margin_benign,margin_jam,features\n"
          << model.val_accuracy << ',' << model.margin_benign << ','
          << model.margin_jam << ','
          << model.pipeline.config().feature_count() << "\n";
  io::write_text(out + "/detector_metrics.csv", metrics.str());
  write_manifest(out, "detect-train", cfg,
                 {"config_echo.toml", "manifest.json", "detector.bin",
                  "detector_metrics.csv"});
  return 0;
}

inline int run_train(const config::AppConfig& cfg, const std::string& out) {
  io::ensure_dir(out);
  write_config_echo(cfg, out);
  trainer::Variant variant = trainer::variant_from_string(cfg.run.variant);

  std::unique_ptr<detector::DetectorRuntime> det;
  std::vector<std::string> outputs = {"config_echo.toml", "manifest.json",
                                      "checkpoint.bin", "curve.csv"};
  if (variant == trainer::Variant::kMappoDet) {
    std::string dpath = out + "/detector.bin";
    detector::DetectorModel model;
    if (fs::exists(dpath)) {
      model = detector_from_checkpoint(ckpt::load(dpath));
    } else {
      model = train_detector_from_scenario(
          cfg, derive_seed(cfg.run.seed, "detector", 0));
      ckpt::save(dpath, detector_to_checkpoint(model));
    }
    outputs.push_back("detector.bin");
    det = std::make_unique<detector::DetectorRuntime>(std::move(model));
  }

  ScenarioConfig sc = cfg.scenario;
  RewardWeights rw = cfg.rewards;
  const LogitSource* det_ptr = det.get();
  auto factory = [sc, rw, det_ptr]() -> std::unique_ptr<trainer::TrainEnv> {
    return std::make_unique<trainer::JammingTrainEnv>(sc, rw, det_ptr);
  };
  trainer::Trainer tr(cfg.trainer, variant, factory, cfg.run.seed);
  trainer::TrainResult res = tr.run();

  ckpt::save(out + "/checkpoint.bin", policy_to_checkpoint(res));
  io::write_curve_csv(out + "/curve.csv", res.curve);
  write_manifest(out, "train", cfg, outputs);
  return 0;
}

struct EvalSetup {
  std::unique_ptr<detector::DetectorRuntime> det;
  std::unique_ptr<trainer::JammingTrainEnv> env;
  trainer::TrainResult policy;
  bool trained = false;
};

inline EvalSetup load_eval_setup(const config::AppConfig& cfg,
                                 const std::string& out) {
  EvalSetup s;
  std::string cpath = out + "/checkpoint.bin";
  if (fs::exists(cpath)) {
    ckpt::Checkpoint ck = ckpt::load(cpath);
    auto [tcfg, variant] = parse_trainer_echo(ck.config_echo);
    if (variant == trainer::Variant::kMappoDet) {
      std::string dpath = out + "/detector.bin";
      if (!fs::exists(dpath))
        throw ConfigError("checkpoint was trained with a detector; missing " +
                          dpath);
      s.det = std::make_unique<detector::DetectorRuntime>(
          detector_from_checkpoint(ckpt::load(dpath)));
    }
    s.env = std::make_unique<trainer::JammingTrainEnv>(cfg.scenario,
                                                       cfg.rewards, s.det.get());
    s.policy = policy_from_checkpoint(ck, *s.env);
    s.trained = true;
  } else {
    s.env = std::make_unique<trainer::JammingTrainEnv>(cfg.scenario,
                                                       cfg.rewards, nullptr);
  }
  return s;
}

inline int run_evaluate(const config::AppConfig& cfg, const std::string& out) {
  io::ensure_dir(out);
  write_config_echo(cfg, out);
  EvalSetup s = load_eval_setup(cfg, out);

  std::vector<std::string> outputs = {"config_echo.toml", "manifest.json",
                                      "eval_summary.csv"};
  std::ostringstream summary;
  summary << "episode,objective,mean_loss,mean_latency_ms,mean_jitter_ms,"
             "mean_attempts,mean_notch_rbs\n";
  for (int ep = 0; ep < cfg.evaluate.episodes; ++ep) {
    RolloutResult r = rollout(
        *s.env, s.trained ? &s.policy : nullptr,
        s.trained ? RolloutPolicy::kTrained : RolloutPolicy::kRandom,
        derive_seed(cfg.run.seed, "eval-episode", ep),
        derive_seed(cfg.run.seed, "eval-action", ep), true);
    std::string name = "kpi_eval_ep" + std::to_string(ep) + ".csv";
    io::write_kpi_csv(out + "/" + name, r.kpis);
    outputs.push_back(name);
    EvalObjectiveResult obj =
        eval_objective(r.kpis, cfg.objective, r.mean_notch_rbs);
    double loss = 0, lat = 0, jit = 0, att = 0;
    for (const auto& k : r.kpis) {
      loss += k.packet_loss;
      lat += k.latency_s;
      jit += k.jitter_s;
      att += k.attempts;
    }
    double n = static_cast<double>(r.kpis.size());
    summary << ep << ',' << obj.value << ',' << loss / n << ','
            << 1e3 * lat / n << ',' << 1e3 * jit / n << ',' << att / n << ','
            << r.mean_notch_rbs << "\n";
  }
  io::write_text(out + "/eval_summary.csv", summary.str());
  write_manifest(out, "evaluate", cfg, outputs,
                 {{"policy", s.trained ? "trained" : "random"}});
  return 0;
}

inline int run_report(const config::AppConfig& cfg, const std::string& out) {
  io::ensure_dir(out);
  write_config_echo(cfg, out);

  std::vector<report::Series> curves;
  std::map<std::string, std::vector<double>> loss_samples;
  std::map<std::string, std::vector<double>> latency_samples;
  for (auto it = fs::recursive_directory_iterator(out);
       it != fs::recursive_directory_iterator(); ++it) {
    if (!it->is_regular_file()) continue;
    std::string name = it->path().filename().string();
    std::string label = fs::relative(it->path().parent_path(), out).string();
    if (label == ".") label = "run";
    if (name == "curve.csv") {
      report::Series s;
      s.label = label;
      for (const auto& row : io::read_curve_csv(it->path().string())) {
        s.x.push_back(row.iter);
        s.y.push_back(row.mean_return);
      }
      curves.push_back(std::move(s));
    } else if (name.rfind("kpi_eval_ep", 0) == 0 ||
               name.rfind("kpi_sim_ep", 0) == 0) {
      for (const auto& k : io::read_kpi_csv(it->path().string())) {
        loss_samples[label].push_back(k.packet_loss);
        latency_samples[label].push_back(1e3 * k.latency_s);
      }
    }
  }

  std::vector<std::string> blocks;
  if (!curves.empty()) {
    std::sort(curves.begin(), curves.end(),
              [](const auto& a, const auto& b) { return a.label < b.label; });
    blocks.push_back(report::svg_chart("Training return", "iteration",
                                       "mean episode return", curves));
  }
  if (!loss_samples.empty()) {
    std::vector<report::Series> cdfs;
    for (const auto& [label, samples] : loss_samples)
      cdfs.push_back(report::cdf_series(label, samples));
    blocks.push_back(report::svg_chart("Packet-loss CDF", "per-slot packet loss",
                                       "fraction of slots", cdfs));
  }
  if (!latency_samples.empty()) {
    std::vector<report::LatencyRow> rows;
    for (const auto& [label, samples] : latency_samples) {
      report::LatencyRow r;
      r.label = label;
      double sum = 0;
      for (double v : samples) sum += v;
      r.mean_ms = sum / samples.size();
      r.median_ms = report::percentile(samples, 0.5);
      r.p95_ms = report::percentile(samples, 0.95);
      rows.push_back(r);
    }
    std::sort(rows.begin(), rows.end(),
              [](const auto& a, const auto& b) { return a.label < b.label; });
    blocks.push_back(report::latency_table_html(rows));
  }
  if (blocks.empty())
    blocks.push_back("<p>No training curves or KPI files found under the "
                     "output directory.</p>");
  io::write_text(out + "/report.html",
                 report::report_html("Link resilience report", blocks));
  write_manifest(out, "report", cfg,
                 {"config_echo.toml", "manifest.json", "report.html"});
  return 0;
}

// ---- CLI dispatch ----

struct CliOptions {
  std::string command;
  std::string config_path;
  std::string out_dir;
  bool has_seed = false;
  std::uint64_t seed = 0;
  std::string variant;  // empty = take from config
};

inline int dispatch(const CliOptions& opt) {
  config::AppConfig cfg = config::load_app_config(opt.config_path);
  if (opt.has_seed) cfg.run.seed = opt.seed;
  if (!opt.variant.empty()) {
    trainer::variant_from_string(opt.variant);
    cfg.run.variant = opt.variant;
  }
  if (opt.command == "simulate") return run_simulate(cfg, opt.out_dir);
  if (opt.command == "train") return run_train(cfg, opt.out_dir);
  if (opt.command == "evaluate") return run_evaluate(cfg, opt.out_dir);
  if (opt.command == "detect-train") return run_detect_train(cfg, opt.out_dir);
  if (opt.command == "report") return run_report(cfg, opt.out_dir);
  throw ConfigError("unknown command: " + opt.command);
}

inline int run_cli(const CliOptions& opt) {
  try {
    return dispatch(opt);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const DivergenceError& e) {
    std::cerr << "numerical divergence: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace jamshield::pipeline
