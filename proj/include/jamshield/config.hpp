#pragma once

#include <cctype>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "jamshield/common.hpp"
#include "jamshield/detector.hpp"
#include "jamshield/env.hpp"
#include "jamshield/scenario.hpp"
#include "jamshield/trainer.hpp"

namespace jamshield::config {

// ---- minimal TOML subset: sections, array-of-tables, scalars, flat arrays ----

struct TomlValue {
  enum class Kind { kBool, kInt, kFloat, kString, kArray };
  Kind kind = Kind::kInt;
  bool b = false;
  long long i = 0;
  double f = 0.0;
  std::string s;
  std::vector<TomlValue> arr;
  int line = 0;
};

struct TomlTable {
  std::map<std::string, TomlValue> values;
  std::map<std::string, TomlTable> children;
  std::map<std::string, std::vector<TomlTable>> table_arrays;
};

namespace detail {

inline std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

inline std::string strip_comment(const std::string& line) {
  bool in_str = false;
  for (size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') in_str = !in_str;
    if (line[i] == '#' && !in_str) return line.substr(0, i);
  }
  return line;
}

inline bool valid_key(const std::string& k) {
  if (k.empty()) return false;
  for (char c : k)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-'))
      return false;
  return true;
}

inline std::vector<std::string> split_path(const std::string& s, int line) {
  std::vector<std::string> parts;
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, '.')) {
    part = trim(part);
    if (!valid_key(part))
      throw ConfigError("config line " + std::to_string(line) +
                        ": bad section name '" + s + "'");
    parts.push_back(part);
  }
  if (parts.empty())
    throw ConfigError("config line " + std::to_string(line) + ": empty section");
  return parts;
}

TomlValue parse_scalar(const std::string& tok, int line);

inline std::vector<std::string> split_array_items(const std::string& body,
                                                  int line) {
  std::vector<std::string> items;
  std::string cur;
  bool in_str = false;
  for (char c : body) {
    if (c == '"') in_str = !in_str;
    if (c == ',' && !in_str) {
      items.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  std::string last = trim(cur);
  if (!last.empty()) items.push_back(last);
  for (const auto& it : items)
    if (it.empty())
      throw ConfigError("config line " + std::to_string(line) +
                        ": empty array element");
  if (in_str)
    throw ConfigError("config line " + std::to_string(line) +
                      ": unterminated string");
  return items;
}

inline TomlValue parse_scalar(const std::string& tok, int line) {
  TomlValue v;
  v.line = line;
  if (tok.empty())
    throw ConfigError("config line " + std::to_string(line) + ": missing value");
  if (tok.front() == '"') {
    if (tok.size() < 2 || tok.back() != '"')
      throw ConfigError("config line " + std::to_string(line) +
                        ": unterminated string");
    v.kind = TomlValue::Kind::kString;
    v.s = tok.substr(1, tok.size() - 2);
    return v;
  }
  if (tok.front() == '[') {
    if (tok.back() != ']')
      throw ConfigError("config line " + std::to_string(line) +
                        ": unterminated array");
    v.kind = TomlValue::Kind::kArray;
    for (const auto& item : split_array_items(tok.substr(1, tok.size() - 2), line))
      v.arr.push_back(parse_scalar(item, line));
    return v;
  }
  if (tok == "true" || tok == "false") {
    v.kind = TomlValue::Kind::kBool;
    v.b = (tok == "true");
    return v;
  }
  bool int_like = !tok.empty();
  for (size_t i = 0; i < tok.size(); ++i) {
    char c = tok[i];
    if (i == 0 && (c == '+' || c == '-')) continue;
    if (!std::isdigit(static_cast<unsigned char>(c))) {
      int_like = false;
      break;
    }
  }
  if (int_like && tok != "+" && tok != "-") {
    v.kind = TomlValue::Kind::kInt;
    try {
      v.i = std::stoll(tok);
    } catch (const std::exception&) {
      throw ConfigError("config line " + std::to_string(line) +
                        ": integer out of range '" + tok + "'");
    }
    return v;
  }
  char* end = nullptr;
  double d = std::strtod(tok.c_str(), &end);
  if (end == tok.c_str() + tok.size() && end != tok.c_str()) {
    v.kind = TomlValue::Kind::kFloat;
    v.f = d;
    return v;
  }
  throw ConfigError("config line " + std::to_string(line) +
                    ": cannot parse value '" + tok + "'");
}

}  // namespace detail

inline TomlTable parse_toml(const std::string& text) {
  TomlTable root;
  TomlTable* cur = &root;
  std::stringstream ss(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(ss, raw)) {
    ++line_no;
    std::string line = detail::trim(detail::strip_comment(raw));
    if (line.empty()) continue;
    if (line.front() == '[') {
      bool is_array = line.size() > 1 && line[1] == '[';
      std::string close = is_array ? "]]" : "]";
      if (line.size() < close.size() + (is_array ? 2 : 1) ||
          line.substr(line.size() - close.size()) != close)
        throw ConfigError("config line " + std::to_string(line_no) +
                          ": malformed section header");
      std::string inner = line.substr(is_array ? 2 : 1,
                                      line.size() - 2 * (is_array ? 2 : 1));
      auto parts = detail::split_path(inner, line_no);
      TomlTable* t = &root;
      for (size_t i = 0; i + 1 < parts.size(); ++i) t = &t->children[parts[i]];
      if (is_array) {
        t->table_arrays[parts.back()].emplace_back();
        cur = &t->table_arrays[parts.back()].back();
      } else {
        cur = &t->children[parts.back()];
      }
      continue;
    }
    size_t eq = std::string::npos;
    {
      bool in_str = false;
      for (size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"') in_str = !in_str;
        if (line[i] == '=' && !in_str) {
          eq = i;
          break;
        }
      }
    }
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": expected key = value");
    std::string key = detail::trim(line.substr(0, eq));
    if (!detail::valid_key(key))
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": bad key '" + key + "'");
    if (cur->values.count(key))
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": duplicate key '" + key + "'");
    cur->values[key] =
        detail::parse_scalar(detail::trim(line.substr(eq + 1)), line_no);
  }
  return root;
}

// Typed accessor that records which keys were consumed so leftovers can be
// rejected with their full dotted path.
class Cursor {
 public:
  Cursor(const TomlTable* t, std::string path, std::set<std::string>* used)
      : t_(t), path_(std::move(path)), used_(used) {}

  bool has(const std::string& key) const {
    return t_ && t_->values.count(key) > 0;
  }

  double number(const std::string& key, double def) const {
    const TomlValue* v = fetch(key);
    if (!v) return def;
    if (v->kind == TomlValue::Kind::kFloat) return v->f;
    if (v->kind == TomlValue::Kind::kInt) return static_cast<double>(v->i);
    throw type_error(key, "a number");
  }

  int integer(const std::string& key, int def) const {
    const TomlValue* v = fetch(key);
    if (!v) return def;
    if (v->kind != TomlValue::Kind::kInt) throw type_error(key, "an integer");
    return static_cast<int>(v->i);
  }

  std::uint64_t unsigned64(const std::string& key, std::uint64_t def) const {
    const TomlValue* v = fetch(key);
    if (!v) return def;
    if (v->kind != TomlValue::Kind::kInt || v->i < 0)
      throw type_error(key, "a non-negative integer");
    return static_cast<std::uint64_t>(v->i);
  }

  bool boolean(const std::string& key, bool def) const {
    const TomlValue* v = fetch(key);
    if (!v) return def;
    if (v->kind != TomlValue::Kind::kBool) throw type_error(key, "a boolean");
    return v->b;
  }

  std::string str(const std::string& key, const std::string& def) const {
    const TomlValue* v = fetch(key);
    if (!v) return def;
    if (v->kind != TomlValue::Kind::kString) throw type_error(key, "a string");
    return v->s;
  }

  std::vector<double> number_array(const std::string& key,
                                   std::vector<double> def) const {
    const TomlValue* v = fetch(key);
    if (!v) return def;
    if (v->kind != TomlValue::Kind::kArray)
      throw type_error(key, "an array of numbers");
    std::vector<double> out;
    for (const auto& e : v->arr) {
      if (e.kind == TomlValue::Kind::kFloat)
        out.push_back(e.f);
      else if (e.kind == TomlValue::Kind::kInt)
        out.push_back(static_cast<double>(e.i));
      else
        throw type_error(key, "an array of numbers");
    }
    return out;
  }

  std::vector<int> int_array(const std::string& key,
                             std::vector<int> def) const {
    const TomlValue* v = fetch(key);
    if (!v) return def;
    if (v->kind != TomlValue::Kind::kArray)
      throw type_error(key, "an array of integers");
    std::vector<int> out;
    for (const auto& e : v->arr) {
      if (e.kind != TomlValue::Kind::kInt)
        throw type_error(key, "an array of integers");
      out.push_back(static_cast<int>(e.i));
    }
    return out;
  }

  Cursor section(const std::string& key) const {
    const TomlTable* child = nullptr;
    if (t_) {
      auto it = t_->children.find(key);
      if (it != t_->children.end()) child = &it->second;
    }
    return Cursor(child, path_ + key + ".", used_);
  }

  std::vector<Cursor> sections(const std::string& key) const {
    std::vector<Cursor> out;
    if (!t_) return out;
    auto it = t_->table_arrays.find(key);
    if (it == t_->table_arrays.end()) return out;
    for (size_t i = 0; i < it->second.size(); ++i)
      out.emplace_back(&it->second[i],
                       path_ + key + "[" + std::to_string(i) + "].", used_);
    return out;
  }

 private:
  const TomlValue* fetch(const std::string& key) const {
    if (!t_) return nullptr;
    auto it = t_->values.find(key);
    if (it == t_->values.end()) return nullptr;
    used_->insert(path_ + key);
    return &it->second;
  }

  ConfigError type_error(const std::string& key, const char* want) const {
    return ConfigError("config key " + path_ + key + " must be " + want);
  }

  const TomlTable* t_;
  std::string path_;
  std::set<std::string>* used_;
};

namespace detail {

inline void collect_keys(const TomlTable& t, const std::string& path,
                         std::set<std::string>& out) {
  for (const auto& [k, v] : t.values) out.insert(path + k);
  for (const auto& [k, c] : t.children) collect_keys(c, path + k + ".", out);
  for (const auto& [k, arr] : t.table_arrays)
    for (size_t i = 0; i < arr.size(); ++i)
      collect_keys(arr[i], path + k + "[" + std::to_string(i) + "].", out);
}

}  // namespace detail

// ---- application config ----

struct RunConfig {
  std::uint64_t seed = 1;
  std::string variant = "mappo";
};

struct SimulateConfig {
  int episodes = 1;
};

struct EvaluateConfig {
  int episodes = 3;
};

struct DetectorSection {
  detector::DetectorTrainConfig train;
  int episodes_per_class = 4;
};

struct AppConfig {
  RunConfig run;
  ScenarioConfig scenario;
  trainer::TrainerConfig trainer;
  RewardWeights rewards;
  ObjectiveWeights objective;
  DetectorSection detector;
  SimulateConfig simulate;
  EvaluateConfig evaluate;

  void validate() const {
    trainer::variant_from_string(run.variant);
    scenario.validate();
    trainer.validate();
    rewards.validate();
    objective.validate();
    detector.train.validate();
    if (detector.episodes_per_class < 1)
      throw ConfigError("detector.episodes_per_class must be >= 1");
    if (simulate.episodes < 1)
      throw ConfigError("simulate.episodes must be >= 1");
    if (evaluate.episodes < 1)
      throw ConfigError("evaluate.episodes must be >= 1");
  }
};

namespace detail {

inline void bind_jammer(const Cursor& c, JammerConfig& j) {
  auto pos = c.number_array("position", {j.position.x(), j.position.y(),
                                         j.position.z()});
  if (pos.size() != 3)
    throw ConfigError("jammer.position must have 3 entries");
  j.position = Eigen::Vector3d(pos[0], pos[1], pos[2]);
  j.tx_power_dbm = c.number("tx_power_dbm", j.tx_power_dbm);
  j.antenna_gain_linear = c.number("antenna_gain", j.antenna_gain_linear);
  j.strategy = jam_strategy_from_string(
      c.str("strategy", to_string(j.strategy)));
  j.rb_span = c.integer("rb_span", j.rb_span);
  j.period_slots = c.integer("period_slots", j.period_slots);
  j.center_hz = c.number("center_hz", j.center_hz);
}

inline void bind_bwp(const Cursor& c, BwpConfig& b) {
  b.center_hz = c.number("center_hz", b.center_hz);
  b.bandwidth_hz = c.number("bandwidth_hz", b.bandwidth_hz);
  b.numerology = c.integer("numerology", b.numerology);
  b.n_rb = c.integer("n_rb", b.n_rb);
  b.slot_duration_s = 1e-3 / static_cast<double>(1 << b.numerology);
}

inline void bind_scenario(const Cursor& c, ScenarioConfig& sc) {
  sc.area_side_m = c.number("area_side_m", sc.area_side_m);
  sc.gnb_height_m = c.number("gnb_height_m", sc.gnb_height_m);
  sc.uav_height_m = c.number("uav_height_m", sc.uav_height_m);
  sc.uav_distance_m = c.number("uav_distance_m", sc.uav_distance_m);
  sc.uav_speed_mps = c.number("uav_speed_mps", sc.uav_speed_mps);
  sc.num_gnb = c.integer("num_gnb", sc.num_gnb);
  sc.uav_tx_power_dbm = c.number("uav_tx_power_dbm", sc.uav_tx_power_dbm);
  sc.interferer_tx_power_dbm =
      c.number("interferer_tx_power_dbm", sc.interferer_tx_power_dbm);
  sc.terrestrial_users = c.integer("terrestrial_users", sc.terrestrial_users);
  sc.terrestrial_load_per_user =
      c.number("terrestrial_load_per_user", sc.terrestrial_load_per_user);
  sc.m_uav = c.integer("m_uav", sc.m_uav);
  sc.m_gnb = c.integer("m_gnb", sc.m_gnb);
  sc.env_label = c.str("env_label", sc.env_label);
  sc.randomize_positions =
      c.boolean("randomize_positions", sc.randomize_positions);
  sc.notch_efficiency = c.number("notch_efficiency", sc.notch_efficiency);
  sc.notch_max = c.integer("notch_max", sc.notch_max);
  sc.r_max_limit = c.integer("r_max_limit", sc.r_max_limit);
  std::string pm = c.str(
      "per_mode", sc.per_mode == PerMode::kAsWritten ? "as_written" : "residual");
  if (pm == "as_written")
    sc.per_mode = PerMode::kAsWritten;
  else if (pm == "residual")
    sc.per_mode = PerMode::kResidual;
  else
    throw ConfigError("scenario.per_mode must be 'as_written' or 'residual'");
  std::string lm = c.str("los_mode", sc.los_mode == LosMode::kForceLos
                                         ? "los"
                                         : sc.los_mode == LosMode::kForceNlos
                                               ? "nlos"
                                               : "probabilistic");
  if (lm == "probabilistic")
    sc.los_mode = LosMode::kProbabilistic;
  else if (lm == "los")
    sc.los_mode = LosMode::kForceLos;
  else if (lm == "nlos")
    sc.los_mode = LosMode::kForceNlos;
  else
    throw ConfigError("scenario.los_mode must be probabilistic, los, or nlos");
  sc.los_d0_m = c.number("los_d0_m", sc.los_d0_m);
  sc.use_blocking_boxes = c.boolean("use_blocking_boxes", sc.use_blocking_boxes);
  sc.num_boxes = c.integer("num_boxes", sc.num_boxes);
  sc.disable_fading = c.boolean("disable_fading", sc.disable_fading);
  sc.disable_shadowing = c.boolean("disable_shadowing", sc.disable_shadowing);
  sc.ambient_doppler_hz = c.number("ambient_doppler_hz", sc.ambient_doppler_hz);
  sc.episode_slots = c.integer("episode_slots", sc.episode_slots);
  sc.packets_per_slot = c.integer("packets_per_slot", sc.packets_per_slot);

  Cursor pl = c.section("pathloss");
  sc.pathloss.gamma_los = pl.number("gamma_los", sc.pathloss.gamma_los);
  sc.pathloss.eta_nlos = pl.number("eta_nlos", sc.pathloss.eta_nlos);
  sc.pathloss.alpha = pl.number("alpha", sc.pathloss.alpha);
  sc.pathloss.fc_hz = pl.number("fc_hz", sc.pathloss.fc_hz);

  Cursor sh = c.section("shadowing");
  sc.shadowing.sigma_los_db = sh.number("sigma_los_db", sc.shadowing.sigma_los_db);
  sc.shadowing.sigma_nlos_db =
      sh.number("sigma_nlos_db", sc.shadowing.sigma_nlos_db);

  Cursor fd = c.section("fading");
  sc.fading.num_clusters = fd.integer("num_clusters", sc.fading.num_clusters);
  sc.fading.delay_spread_s = fd.number("delay_spread_s", sc.fading.delay_spread_s);
  sc.fading.asa_deg = fd.number("asa_deg", sc.fading.asa_deg);
  sc.fading.asd_deg = fd.number("asd_deg", sc.fading.asd_deg);
  sc.fading.zsa_deg = fd.number("zsa_deg", sc.fading.zsa_deg);
  sc.fading.zsd_deg = fd.number("zsd_deg", sc.fading.zsd_deg);
  sc.fading.per_cluster_power_decay_db =
      fd.number("per_cluster_power_decay_db", sc.fading.per_cluster_power_decay_db);

  Cursor nz = c.section("noise");
  sc.noise.temperature_k = nz.number("temperature_k", sc.noise.temperature_k);
  sc.noise.noise_figure_linear =
      nz.number("noise_figure", sc.noise.noise_figure_linear);

  Cursor ca = c.section("carrier");
  sc.carrier.lo_hz = ca.number("lo_hz", sc.carrier.lo_hz);
  sc.carrier.hi_hz = ca.number("hi_hz", sc.carrier.hi_hz);

  bind_bwp(c.section("bwp0"), sc.bwp0);
  bind_bwp(c.section("bwp1"), sc.bwp1);

  Cursor es = c.section("esm");
  sc.esm.beta_eesm = es.number("beta_eesm", sc.esm.beta_eesm);
  sc.esm.bler_sinr50_db = es.number("bler_sinr50_db", sc.esm.bler_sinr50_db);
  sc.esm.bler_slope = es.number("bler_slope", sc.esm.bler_slope);

  Cursor pe = c.section("penalties");
  sc.penalties.bwp_switch_s = pe.number("bwp_switch_s", sc.penalties.bwp_switch_s);
  sc.penalties.beam_update_s =
      pe.number("beam_update_s", sc.penalties.beam_update_s);
  sc.penalties.notch_update_s =
      pe.number("notch_update_s", sc.penalties.notch_update_s);
  sc.penalties.beam_threshold_rad =
      pe.number("beam_threshold_rad", sc.penalties.beam_threshold_rad);

  std::vector<Cursor> jam = c.sections("jammers");
  if (!jam.empty()) {
    sc.jammers.clear();
    for (const auto& jc : jam) {
      JammerConfig j;
      bind_jammer(jc, j);
      sc.jammers.push_back(j);
    }
  }
}

inline void bind_trainer(const Cursor& c, trainer::TrainerConfig& t) {
  t.gamma = c.number("gamma", t.gamma);
  t.clip_eps = c.number("clip_eps", t.clip_eps);
  t.kl_chi = c.number("kl_chi", t.kl_chi);
  t.gae_lambda = c.number("gae_lambda", t.gae_lambda);
  t.lr_start = c.number("lr_start", t.lr_start);
  t.lr_end = c.number("lr_end", t.lr_end);
  t.batch_start = c.integer("batch_start", t.batch_start);
  t.batch_end = c.integer("batch_end", t.batch_end);
  t.epochs = c.integer("epochs", t.epochs);
  t.episodes_per_iter = c.integer("episodes_per_iter", t.episodes_per_iter);
  t.ppo_epochs = c.integer("ppo_epochs", t.ppo_epochs);
  t.entropy_coef = c.number("entropy_coef", t.entropy_coef);
  t.value_coef = c.number("value_coef", t.value_coef);
  t.max_grad_norm = c.number("max_grad_norm", t.max_grad_norm);
  t.hidden = c.int_array("hidden", t.hidden);
  t.value_norm = c.boolean("value_norm", t.value_norm);
}

inline void bind_rewards(const Cursor& c, RewardWeights& r) {
  r.a1_delivery = c.number("a1_delivery", r.a1_delivery);
  r.a1_sinr = c.number("a1_sinr", r.a1_sinr);
  r.a1_latency = c.number("a1_latency", r.a1_latency);
  r.a1_jitter = c.number("a1_jitter", r.a1_jitter);
  r.a2_delivery = c.number("a2_delivery", r.a2_delivery);
  r.a2_sinr = c.number("a2_sinr", r.a2_sinr);
  r.a2_rsrp = c.number("a2_rsrp", r.a2_rsrp);
}

inline void bind_objective(const Cursor& c, ObjectiveWeights& o) {
  o.phi = c.number("phi", o.phi);
  o.beta = c.number("beta", o.beta);
  o.mu = c.number("mu", o.mu);
  o.psi = c.number("psi", o.psi);
  o.c_min = c.number("c_min", o.c_min);
  if (c.has("c_max")) o.c_max = c.number("c_max", o.c_max);
  o.l_max_s = c.number("l_max_s", o.l_max_s);
  o.j_max_s = c.number("j_max_s", o.j_max_s);
  o.n_notch_max = c.integer("n_notch_max", o.n_notch_max);
}

inline void bind_detector(const Cursor& c, DetectorSection& d) {
  d.train.pipeline.window_len =
      c.integer("window_len", d.train.pipeline.window_len);
  d.train.pipeline.stride = c.integer("stride", d.train.pipeline.stride);
  d.train.pipeline.pca_components =
      c.integer("pca_components", d.train.pipeline.pca_components);
  d.train.pipeline.scenario = c.str("scenario", d.train.pipeline.scenario);
  d.train.encoder_widths = c.int_array("encoder_widths", d.train.encoder_widths);
  d.train.heads = c.integer("heads", d.train.heads);
  d.train.loss.alpha_uncertainty =
      c.number("alpha_uncertainty", d.train.loss.alpha_uncertainty);
  d.train.loss.grad_accum_steps =
      c.integer("grad_accum_steps", d.train.loss.grad_accum_steps);
  d.train.steps = c.integer("steps", d.train.steps);
  d.train.batch = c.integer("batch", d.train.batch);
  d.train.lr = c.number("lr", d.train.lr);
  d.train.val_fraction = c.number("val_fraction", d.train.val_fraction);
  d.episodes_per_class = c.integer("episodes_per_class", d.episodes_per_class);
}

}  // namespace detail

inline AppConfig parse_app_config(const std::string& text) {
  TomlTable root = parse_toml(text);
  std::set<std::string> used;
  Cursor top(&root, "", &used);

  AppConfig cfg;
  Cursor run = top.section("run");
  cfg.run.seed = run.unsigned64("seed", cfg.run.seed);
  cfg.run.variant = run.str("variant", cfg.run.variant);
  detail::bind_scenario(top.section("scenario"), cfg.scenario);
  detail::bind_trainer(top.section("trainer"), cfg.trainer);
  detail::bind_rewards(top.section("rewards"), cfg.rewards);
  detail::bind_objective(top.section("objective"), cfg.objective);
  detail::bind_detector(top.section("detector"), cfg.detector);
  Cursor sim = top.section("simulate");
  cfg.simulate.episodes = sim.integer("episodes", cfg.simulate.episodes);
  Cursor ev = top.section("evaluate");
  cfg.evaluate.episodes = ev.integer("episodes", cfg.evaluate.episodes);

  std::set<std::string> all;
  detail::collect_keys(root, "", all);
  for (const auto& k : all)
    if (!used.count(k)) throw ConfigError("unknown config key: " + k);

  cfg.validate();
  return cfg;
}

inline AppConfig load_app_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file: " + path);
  std::stringstream buf;
  buf << is.rdbuf();
  return parse_app_config(buf.str());
}

// ---- canonical echo ----

namespace detail {

inline std::string fmt(double v) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  std::string s(buf, res.ptr);
  if (s.find('.') == std::string::npos && s.find('e') == std::string::npos &&
      s.find("inf") == std::string::npos && s.find("nan") == std::string::npos)
    s += ".0";
  return s;
}

inline std::string fmt(bool v) { return v ? "true" : "false"; }

inline std::string fmt(const std::vector<int>& v) {
  std::string s = "[";
  for (size_t i = 0; i < v.size(); ++i)
    s += (i ? ", " : "") + std::to_string(v[i]);
  return s + "]";
}

}  // namespace detail

// Deterministic round-trippable rendering of the effective configuration.
inline std::string echo_toml(const AppConfig& c) {
  using detail::fmt;
  std::ostringstream o;
  o << "[run]\n";
  o << "seed = " << c.run.seed << "\n";
  o << "variant = \"" << c.run.variant << "\"\n\n";

  const ScenarioConfig& s = c.scenario;
  o << "[scenario]\n";
  o << "area_side_m = " << fmt(s.area_side_m) << "\n";
  o << "gnb_height_m = " << fmt(s.gnb_height_m) << "\n";
  o << "uav_height_m = " << fmt(s.uav_height_m) << "\n";
  o << "uav_distance_m = " << fmt(s.uav_distance_m) << "\n";
  o << "uav_speed_mps = " << fmt(s.uav_speed_mps) << "\n";
  o << "num_gnb = " << s.num_gnb << "\n";
  o << "uav_tx_power_dbm = " << fmt(s.uav_tx_power_dbm) << "\n";
  o << "interferer_tx_power_dbm = " << fmt(s.interferer_tx_power_dbm) << "\n";
  o << "terrestrial_users = " << s.terrestrial_users << "\n";
  o << "terrestrial_load_per_user = " << fmt(s.terrestrial_load_per_user) << "\n";
  o << "m_uav = " << s.m_uav << "\n";
  o << "m_gnb = " << s.m_gnb << "\n";
  o << "env_label = \"" << s.env_label << "\"\n";
  o << "randomize_positions = " << fmt(s.randomize_positions) << "\n";
  o << "notch_efficiency = " << fmt(s.notch_efficiency) << "\n";
  o << "notch_max = " << s.notch_max << "\n";
  o << "r_max_limit = " << s.r_max_limit << "\n";
  o << "per_mode = \""
    << (s.per_mode == PerMode::kAsWritten ? "as_written" : "residual") << "\"\n";
  o << "los_mode = \""
    << (s.los_mode == LosMode::kForceLos
            ? "los"
            : s.los_mode == LosMode::kForceNlos ? "nlos" : "probabilistic")
    << "\"\n";
  o << "los_d0_m = " << fmt(s.los_d0_m) << "\n";
  o << "use_blocking_boxes = " << fmt(s.use_blocking_boxes) << "\n";
  o << "num_boxes = " << s.num_boxes << "\n";
  o << "disable_fading = " << fmt(s.disable_fading) << "\n";
  o << "disable_shadowing = " << fmt(s.disable_shadowing) << "\n";
  o << "ambient_doppler_hz = " << fmt(s.ambient_doppler_hz) << "\n";
  o << "episode_slots = " << s.episode_slots << "\n";
  o << "packets_per_slot = " << s.packets_per_slot << "\n\n";

  o << "[scenario.pathloss]\n";
  o << "gamma_los = " << fmt(s.pathloss.gamma_los) << "\n";
  o << "eta_nlos = " << fmt(s.pathloss.eta_nlos) << "\n";
  o << "alpha = " << fmt(s.pathloss.alpha) << "\n";
  o << "fc_hz = " << fmt(s.pathloss.fc_hz) << "\n\n";

  o << "[scenario.shadowing]\n";
  o << "sigma_los_db = " << fmt(s.shadowing.sigma_los_db) << "\n";
  o << "sigma_nlos_db = " << fmt(s.shadowing.sigma_nlos_db) << "\n\n";

  o << "[scenario.fading]\n";
  o << "num_clusters = " << s.fading.num_clusters << "\n";
  o << "delay_spread_s = " << fmt(s.fading.delay_spread_s) << "\n";
  o << "asa_deg = " << fmt(s.fading.asa_deg) << "\n";
  o << "asd_deg = " << fmt(s.fading.asd_deg) << "\n";
  o << "zsa_deg = " << fmt(s.fading.zsa_deg) << "\n";
  o << "zsd_deg = " << fmt(s.fading.zsd_deg) << "\n";
  o << "per_cluster_power_decay_db = " << fmt(s.fading.per_cluster_power_decay_db)
    << "\n\n";

  o << "[scenario.noise]\n";
  o << "temperature_k = " << fmt(s.noise.temperature_k) << "\n";
  o << "noise_figure = " << fmt(s.noise.noise_figure_linear) << "\n\n";

  o << "[scenario.carrier]\n";
  o << "lo_hz = " << fmt(s.carrier.lo_hz) << "\n";
  o << "hi_hz = " << fmt(s.carrier.hi_hz) << "\n\n";

  for (int b = 0; b < 2; ++b) {
    const BwpConfig& w = s.bwp(b);
    o << "[scenario.bwp" << b << "]\n";
    o << "center_hz = " << fmt(w.center_hz) << "\n";
    o << "bandwidth_hz = " << fmt(w.bandwidth_hz) << "\n";
    o << "numerology = " << w.numerology << "\n";
    o << "n_rb = " << w.n_rb << "\n\n";
  }

  o << "[scenario.esm]\n";
  o << "beta_eesm = " << fmt(s.esm.beta_eesm) << "\n";
  o << "bler_sinr50_db = " << fmt(s.esm.bler_sinr50_db) << "\n";
  o << "bler_slope = " << fmt(s.esm.bler_slope) << "\n\n";

  o << "[scenario.penalties]\n";
  o << "bwp_switch_s = " << fmt(s.penalties.bwp_switch_s) << "\n";
  o << "beam_update_s = " << fmt(s.penalties.beam_update_s) << "\n";
  o << "notch_update_s = " << fmt(s.penalties.notch_update_s) << "\n";
  o << "beam_threshold_rad = " << fmt(s.penalties.beam_threshold_rad) << "\n\n";

  for (const auto& j : s.jammers) {
    o << "[[scenario.jammers]]\n";
    o << "position = [" << fmt(j.position.x()) << ", " << fmt(j.position.y())
      << ", " << fmt(j.position.z()) << "]\n";
    o << "tx_power_dbm = " << fmt(j.tx_power_dbm) << "\n";
    o << "antenna_gain = " << fmt(j.antenna_gain_linear) << "\n";
    o << "strategy = \"" << to_string(j.strategy) << "\"\n";
    o << "rb_span = " << j.rb_span << "\n";
    o << "period_slots = " << j.period_slots << "\n";
    o << "center_hz = " << fmt(j.center_hz) << "\n\n";
  }

  const trainer::TrainerConfig& t = c.trainer;
  o << "[trainer]\n";
  o << "gamma = " << fmt(t.gamma) << "\n";
  o << "clip_eps = " << fmt(t.clip_eps) << "\n";
  o << "kl_chi = " << fmt(t.kl_chi) << "\n";
  o << "gae_lambda = " << fmt(t.gae_lambda) << "\n";
  o << "lr_start = " << fmt(t.lr_start) << "\n";
  o << "lr_end = " << fmt(t.lr_end) << "\n";
  o << "batch_start = " << t.batch_start << "\n";
  o << "batch_end = " << t.batch_end << "\n";
  o << "epochs = " << t.epochs << "\n";
  o << "episodes_per_iter = " << t.episodes_per_iter << "\n";
  o << "ppo_epochs = " << t.ppo_epochs << "\n";
  o << "entropy_coef = " << fmt(t.entropy_coef) << "\n";
  o << "value_coef = " << fmt(t.value_coef) << "\n";
  o << "max_grad_norm = " << fmt(t.max_grad_norm) << "\n";
  o << "hidden = " << fmt(t.hidden) << "\n";
  o << "value_norm = " << fmt(t.value_norm) << "\n\n";

  const RewardWeights& r = c.rewards;
  o << "[rewards]\n";
  o << "a1_delivery = " << fmt(r.a1_delivery) << "\n";
  o << "a1_sinr = " << fmt(r.a1_sinr) << "\n";
  o << "a1_latency = " << fmt(r.a1_latency) << "\n";
  o << "a1_jitter = " << fmt(r.a1_jitter) << "\n";
  o << "a2_delivery = " << fmt(r.a2_delivery) << "\n";
  o << "a2_sinr = " << fmt(r.a2_sinr) << "\n";
  o << "a2_rsrp = " << fmt(r.a2_rsrp) << "\n\n";

  const ObjectiveWeights& w = c.objective;
  o << "[objective]\n";
  o << "phi = " << fmt(w.phi) << "\n";
  o << "beta = " << fmt(w.beta) << "\n";
  o << "mu = " << fmt(w.mu) << "\n";
  o << "psi = " << fmt(w.psi) << "\n";
  o << "c_min = " << fmt(w.c_min) << "\n";
  if (std::isfinite(w.c_max)) o << "c_max = " << fmt(w.c_max) << "\n";
  o << "l_max_s = " << fmt(w.l_max_s) << "\n";
  o << "j_max_s = " << fmt(w.j_max_s) << "\n";
  o << "n_notch_max = " << w.n_notch_max << "\n\n";

  const DetectorSection& d = c.detector;
  o << "[detector]\n";
  o << "window_len = " << d.train.pipeline.window_len << "\n";
  o << "stride = " << d.train.pipeline.stride << "\n";
  o << "pca_components = " << d.train.pipeline.pca_components << "\n";
  o << "scenario = \"" << d.train.pipeline.scenario << "\"\n";
  o << "encoder_widths = " << fmt(d.train.encoder_widths) << "\n";
  o << "heads = " << d.train.heads << "\n";
  o << "alpha_uncertainty = " << fmt(d.train.loss.alpha_uncertainty) << "\n";
  o << "grad_accum_steps = " << d.train.loss.grad_accum_steps << "\n";
  o << "steps = " << d.train.steps << "\n";
  o << "batch = " << d.train.batch << "\n";
  o << "lr = " << fmt(d.train.lr) << "\n";
  o << "val_fraction = " << fmt(d.train.val_fraction) << "\n";
  o << "episodes_per_class = " << d.episodes_per_class << "\n\n";

  o << "[simulate]\n";
  o << "episodes = " << c.simulate.episodes << "\n\n";
  o << "[evaluate]\n";
  o << "episodes = " << c.evaluate.episodes << "\n";
  return o.str();
}

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

// Compact echo of the trainer settings stored inside checkpoints.
inline std::string trainer_config_echo(const trainer::TrainerConfig& t,
                                       const std::string& variant) {
  std::ostringstream o;
  o << "variant=" << variant;
  o << ";gamma=" << detail::fmt(t.gamma);
  o << ";clip_eps=" << detail::fmt(t.clip_eps);
  o << ";kl_chi=" << detail::fmt(t.kl_chi);
  o << ";gae_lambda=" << detail::fmt(t.gae_lambda);
  o << ";lr_start=" << detail::fmt(t.lr_start);
  o << ";lr_end=" << detail::fmt(t.lr_end);
  o << ";batch_start=" << t.batch_start;
  o << ";batch_end=" << t.batch_end;
  o << ";epochs=" << t.epochs;
  o << ";episodes_per_iter=" << t.episodes_per_iter;
  o << ";ppo_epochs=" << t.ppo_epochs;
  o << ";entropy_coef=" << detail::fmt(t.entropy_coef);
  o << ";value_coef=" << detail::fmt(t.value_coef);
  o << ";max_grad_norm=" << detail::fmt(t.max_grad_norm);
  o << ";hidden=" << detail::fmt(t.hidden);
  o << ";value_norm=" << detail::fmt(t.value_norm);
  return o.str();
}

}  // namespace jamshield::config
