#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "jamshield/autodiff.hpp"
#include "jamshield/common.hpp"
#include "jamshield/env.hpp"
#include "jamshield/nn.hpp"

namespace jamshield::detector {

using Mat = Eigen::MatrixXd;

// ---- windowed signal transforms ----

inline constexpr int kNumTransforms = 9;

inline const char* transform_name(int i) {
  static const char* names[kNumTransforms] = {
      "identity",  "diff",     "moving_mean", "moving_std", "squared",
      "cumsum",    "detrend",  "zscore",      "minmax"};
  return names[i];
}

// All transforms map a window to a window of the same length.
inline Eigen::VectorXd apply_transform(int which, const Eigen::VectorXd& x) {
  const int n = static_cast<int>(x.size());
  Eigen::VectorXd y(n);
  switch (which) {
    case 0:
      return x;
    case 1:
      y(0) = 0.0;
      for (int i = 1; i < n; ++i) y(i) = x(i) - x(i - 1);
      return y;
    case 2: {
      const int w = 10;
      double acc = 0.0;
      for (int i = 0; i < n; ++i) {
        acc += x(i);
        if (i >= w) acc -= x(i - w);
        y(i) = acc / std::min(i + 1, w);
      }
      return y;
    }
    case 3: {
      const int w = 10;
      for (int i = 0; i < n; ++i) {
        int lo = std::max(0, i - w + 1);
        int m = i - lo + 1;
        double mean = x.segment(lo, m).mean();
        double var = (x.segment(lo, m).array() - mean).square().sum() / m;
        y(i) = std::sqrt(var);
      }
      return y;
    }
    case 4:
      return x.array().square();
    case 5: {
      double acc = 0.0;
      for (int i = 0; i < n; ++i) {
        acc += x(i);
        y(i) = acc;
      }
      return y;
    }
    case 6: {
      // remove least-squares line
      double tm = 0.5 * (n - 1);
      double xm = x.mean();
      double num = 0.0, den = 0.0;
      for (int i = 0; i < n; ++i) {
        num += (i - tm) * (x(i) - xm);
        den += (i - tm) * (i - tm);
      }
      double slope = den > 0.0 ? num / den : 0.0;
      for (int i = 0; i < n; ++i) y(i) = x(i) - (xm + slope * (i - tm));
      return y;
    }
    case 7: {
      double mean = x.mean();
      double sd = std::sqrt((x.array() - mean).square().sum() / n);
      if (sd < 1e-12) return Eigen::VectorXd::Zero(n);
      return ((x.array() - mean) / sd).matrix();
    }
    case 8: {
      double lo = x.minCoeff(), hi = x.maxCoeff();
      if (hi - lo < 1e-12) return Eigen::VectorXd::Zero(n);
      return ((x.array() - lo) / (hi - lo)).matrix();
    }
    default:
      throw std::domain_error("apply_transform: unknown transform index");
  }
}

// ---- PCA ----

struct Pca {
  Eigen::RowVectorXd mean;
  Mat basis;                 // cols x components, orthonormal columns
  Eigen::VectorXd variances;  // descending

  static Pca fit(const Mat& data, int components) {
    if (data.rows() < components)
      throw std::domain_error("pca: need at least `components` rows");
    Pca p;
    p.mean = data.colwise().mean();
    Mat centered = data.rowwise() - p.mean;
    Mat cov = centered.transpose() * centered /
              std::max<double>(1.0, data.rows() - 1.0);
    Eigen::SelfAdjointEigenSolver<Mat> es(cov);
    // eigenvalues ascending; take the tail in reverse
    int avail = std::min<int>(components, static_cast<int>(cov.cols()));
    p.basis = Mat::Zero(cov.cols(), components);
    p.variances = Eigen::VectorXd::Zero(components);
    for (int i = 0; i < avail; ++i) {
      int src = static_cast<int>(cov.cols()) - 1 - i;
      p.basis.col(i) = es.eigenvectors().col(src);
      p.variances(i) = std::max(0.0, es.eigenvalues()(src));
    }
    return p;
  }

  Mat project(const Mat& data) const {
    return (data.rowwise() - mean) * basis;
  }
};

// ---- feature pipeline ----

struct FeaturePipelineConfig {
  int window_len = 300;
  int stride = 50;
  int pca_components = 8;
  std::string scenario = "los";  // "los" keeps 5 per group, "nlos" 3

  int selected_per_group() const { return scenario == "nlos" ? 3 : 5; }
  int feature_count() const { return kNumTransforms * selected_per_group() * 2; }

  void validate() const {
    if (window_len < 2) throw ConfigError("detector.window_len must be >= 2");
    if (stride < 1) throw ConfigError("detector.stride must be >= 1");
    if (scenario != "los" && scenario != "nlos")
      throw ConfigError("detector.scenario must be 'los' or 'nlos'");
    if (pca_components < selected_per_group())
      throw ConfigError("detector.pca_components below selected feature count");
  }
};

inline int window_count(int series_len, const FeaturePipelineConfig& cfg) {
  if (series_len < cfg.window_len)
    throw std::domain_error("extract_features: series shorter than window");
  return (series_len - cfg.window_len) / cfg.stride + 1;
}

struct WindowPair {
  Eigen::VectorXd rssi;
  Eigen::VectorXd sinr;
};

class FeaturePipeline {
 public:
  explicit FeaturePipeline(FeaturePipelineConfig cfg = {}) : cfg_(cfg) {
    cfg_.validate();
  }

  const FeaturePipelineConfig& config() const { return cfg_; }
  bool fitted() const { return !groups_.empty(); }

  // One PCA per (signal, transform) group, fitted over the given windows.
  void fit(const std::vector<WindowPair>& windows) {
    if (windows.empty()) throw std::domain_error("pipeline fit: no windows");
    int comps = std::min<int>(cfg_.pca_components,
                              static_cast<int>(windows.size()));
    comps = std::max(comps, cfg_.selected_per_group());
    groups_.clear();
    for (int sig = 0; sig < 2; ++sig) {
      for (int tr = 0; tr < kNumTransforms; ++tr) {
        Mat data(windows.size(), cfg_.window_len);
        for (size_t w = 0; w < windows.size(); ++w) {
          const Eigen::VectorXd& src =
              sig == 0 ? windows[w].rssi : windows[w].sinr;
          data.row(w) = apply_transform(tr, src).transpose();
        }
        if (static_cast<int>(windows.size()) < comps) {
          // degenerate tiny fit: pad rows by repetition
          Mat padded(comps, cfg_.window_len);
          for (int r = 0; r < comps; ++r)
            padded.row(r) = data.row(r % data.rows());
          groups_.push_back(Pca::fit(padded, comps));
        } else {
          groups_.push_back(Pca::fit(data, comps));
        }
      }
    }
  }

  Eigen::RowVectorXd project(const WindowPair& w) const {
    if (!fitted()) throw std::domain_error("pipeline: project before fit");
    const int sel = cfg_.selected_per_group();
    Eigen::RowVectorXd out(cfg_.feature_count());
    int off = 0;
    for (int sig = 0; sig < 2; ++sig) {
      for (int tr = 0; tr < kNumTransforms; ++tr) {
        const Pca& p = groups_[sig * kNumTransforms + tr];
        Eigen::VectorXd t =
            apply_transform(tr, sig == 0 ? w.rssi : w.sinr);
        Eigen::RowVectorXd proj = p.project(t.transpose());
        out.segment(off, sel) = proj.leftCols(sel);
        off += sel;
      }
    }
    return out;
  }

  Mat extract(const std::vector<double>& rssi,
              const std::vector<double>& sinr) const {
    if (rssi.size() != sinr.size())
      throw std::domain_error("extract: series length mismatch");
    int count = window_count(static_cast<int>(rssi.size()), cfg_);
    Mat out(count, cfg_.feature_count());
    for (int i = 0; i < count; ++i)
      out.row(i) = project(cut(rssi, sinr, i * cfg_.stride, cfg_.window_len));
    return out;
  }

  static WindowPair cut(const std::vector<double>& rssi,
                        const std::vector<double>& sinr, int start, int len) {
    WindowPair w;
    w.rssi = Eigen::Map<const Eigen::VectorXd>(rssi.data() + start, len);
    w.sinr = Eigen::Map<const Eigen::VectorXd>(sinr.data() + start, len);
    return w;
  }

  const std::vector<Pca>& groups() const { return groups_; }
  std::vector<Pca>& groups_mutable() { return groups_; }

 private:
  FeaturePipelineConfig cfg_;
  std::vector<Pca> groups_;
};

// Fit on the series' own windows, then project them. Self-contained helper
// mirroring the one-shot feature-extraction contract.
inline Mat extract_features(const std::vector<double>& rssi,
                            const std::vector<double>& sinr,
                            const FeaturePipelineConfig& cfg) {
  FeaturePipeline p(cfg);
  int count = window_count(static_cast<int>(rssi.size()), cfg);
  std::vector<WindowPair> wins;
  for (int i = 0; i < count; ++i)
    wins.push_back(FeaturePipeline::cut(rssi, sinr, i * cfg.stride, cfg.window_len));
  p.fit(wins);
  Mat out(count, cfg.feature_count());
  for (int i = 0; i < count; ++i) out.row(i) = p.project(wins[i]);
  return out;
}

// ---- U-shaped attention classifier ----

struct DetectorSpec {
  int input_dim = 90;
  std::vector<int> encoder_widths = {32, 16, 8};
  int heads = 2;

  std::vector<int> activation_widths() const {
    std::vector<int> w = encoder_widths;
    for (auto it = encoder_widths.rbegin(); it != encoder_widths.rend(); ++it)
      w.push_back(*it);
    return w;
  }

  void validate() const {
    if (input_dim < 1) throw ConfigError("detector.input_dim must be >= 1");
    if (encoder_widths.empty())
      throw ConfigError("detector needs >= 1 encoder stage");
    for (int w : encoder_widths)
      if (w < 1) throw ConfigError("detector widths must be >= 1");
    if (heads < 1) throw ConfigError("detector.heads must be >= 1");
  }
};

class DetectorNet {
 public:
  static DetectorNet create(nn::ParamStore& ps, const std::string& prefix,
                            const DetectorSpec& spec, Rng& rng) {
    spec.validate();
    DetectorNet net;
    net.spec_ = spec;
    std::vector<int> enc = spec.encoder_widths;
    int prev = spec.input_dim;
    for (size_t i = 0; i < enc.size(); ++i) {
      net.stages_.push_back(Stage::create(
          ps, prefix + ".enc" + std::to_string(i), prev, enc[i], spec.heads, rng));
      prev = enc[i];
    }
    for (size_t i = 0; i < enc.size(); ++i) {
      int width = enc[enc.size() - 1 - i];
      int in = prev;
      if (i > 0) in += width;  // skip concat with the matching encoder stage
      net.stages_.push_back(Stage::create(
          ps, prefix + ".dec" + std::to_string(i), in, width, spec.heads, rng));
      prev = width;
    }
    net.head_w_ = ps.add(prefix + ".head.w",
                         nn::xavier_uniform(prev, 2, rng));
    net.head_b_ = ps.add(prefix + ".head.b", Mat::Zero(1, 2));
    return net;
  }

  // B x input -> B x 2 logits. Optionally records the stage output widths.
  ad::Var forward(ad::Tape& t, const nn::TapeBinding& b, ad::Var x,
                  std::vector<int>* widths = nullptr) const {
    const size_t n_enc = spec_.encoder_widths.size();
    std::vector<ad::Var> enc_out;
    ad::Var h = x;
    for (size_t i = 0; i < n_enc; ++i) {
      h = stages_[i].forward(t, b, h);
      enc_out.push_back(h);
      if (widths) widths->push_back(static_cast<int>(t.val(h).cols()));
    }
    for (size_t i = 0; i < n_enc; ++i) {
      if (i > 0) {
        // pair with the encoder stage of equal width
        ad::Var skip = enc_out[n_enc - 1 - i];
        h = t.concat_cols(h, skip);
      }
      h = stages_[n_enc + i].forward(t, b, h);
      if (widths) widths->push_back(static_cast<int>(t.val(h).cols()));
    }
    return t.add_rowvec(t.matmul(h, b[head_w_]), b[head_b_]);
  }

  // Tape-free single-row inference; used by the frozen runtime.
  Eigen::RowVectorXd infer_row(const nn::ParamStore& ps,
                               Eigen::RowVectorXd x) const {
    const size_t n_enc = spec_.encoder_widths.size();
    std::vector<Eigen::RowVectorXd> enc_out;
    Eigen::RowVectorXd h = std::move(x);
    for (size_t i = 0; i < n_enc; ++i) {
      h = stages_[i].infer_row(ps, h);
      enc_out.push_back(h);
    }
    for (size_t i = 0; i < n_enc; ++i) {
      if (i > 0) {
        const Eigen::RowVectorXd& skip = enc_out[n_enc - 1 - i];
        Eigen::RowVectorXd cat(h.size() + skip.size());
        cat << h, skip;
        h = cat;
      }
      h = stages_[n_enc + i].infer_row(ps, h);
    }
    return h * ps.at(head_w_).value + ps.at(head_b_).value;
  }

  const DetectorSpec& spec() const { return spec_; }

 private:
  struct Stage {
    int w = -1, b = -1;          // linear
    int ln_g = -1, ln_b = -1;    // layer norm
    int conv_k = -1, conv_b = -1;
    std::vector<int> wq, wk, wv, wo;  // per head scalars

    static Stage create(nn::ParamStore& ps, const std::string& prefix, int in,
                        int out, int heads, Rng& rng) {
      Stage s;
      s.w = ps.add(prefix + ".w", nn::xavier_uniform(in, out, rng));
      s.b = ps.add(prefix + ".b", Mat::Zero(1, out));
      s.ln_g = ps.add(prefix + ".ln_g", Mat::Ones(1, out));
      s.ln_b = ps.add(prefix + ".ln_b", Mat::Zero(1, out));
      s.conv_k = ps.add(prefix + ".conv_k", nn::xavier_uniform(1, 3, rng));
      s.conv_b = ps.add(prefix + ".conv_b", Mat::Zero(1, 1));
      for (int h = 0; h < heads; ++h) {
        std::string hp = prefix + ".h" + std::to_string(h);
        auto scalar = [&](const char* nm) {
          return ps.add(hp + nm, Mat::Constant(1, 1, rng.uniform(-0.5, 0.5)));
        };
        s.wq.push_back(scalar(".wq"));
        s.wk.push_back(scalar(".wk"));
        s.wv.push_back(scalar(".wv"));
        s.wo.push_back(scalar(".wo"));
      }
      return s;
    }

    ad::Var forward(ad::Tape& t, const nn::TapeBinding& bd, ad::Var x) const {
      ad::Var h = t.add_rowvec(t.matmul(x, bd[w]), bd[b]);
      h = t.layernorm_rows(h, bd[ln_g], bd[ln_b]);
      h = t.conv3_rows(h, bd[conv_k], bd[conv_b]);
      ad::Var gram = t.batched_gram(h);
      ad::Var attn;
      for (size_t i = 0; i < wq.size(); ++i) {
        ad::Var s = t.mul(bd[wq[i]], bd[wk[i]]);
        ad::Var a = t.softmax_rows(t.scale_var(gram, s));
        ad::Var v = t.scale_var(h, bd[wv[i]]);
        ad::Var o = t.scale_var(t.batched_apply(a, v), bd[wo[i]]);
        attn = (i == 0) ? o : t.add(attn, o);
      }
      h = t.add(h, attn);
      return t.gelu(h);
    }

    Eigen::RowVectorXd infer_row(const nn::ParamStore& ps,
                                 const Eigen::RowVectorXd& x) const {
      Eigen::RowVectorXd h = x * ps.at(w).value + ps.at(b).value;
      // layer norm
      double mu = h.mean();
      double var = (h.array() - mu).square().mean();
      double inv = 1.0 / std::sqrt(var + 1e-5);
      h = (((h.array() - mu) * inv) * ps.at(ln_g).value.row(0).array() +
           ps.at(ln_b).value.row(0).array())
              .matrix();
      // conv3
      const Mat& k = ps.at(conv_k).value;
      double cb = ps.at(conv_b).value(0, 0);
      Eigen::RowVectorXd c(h.size());
      for (int i = 0; i < h.size(); ++i) {
        double acc = cb + k(0, 1) * h(i);
        if (i > 0) acc += k(0, 0) * h(i - 1);
        if (i + 1 < h.size()) acc += k(0, 2) * h(i + 1);
        c(i) = acc;
      }
      // single-sample attention
      Eigen::RowVectorXd attn = Eigen::RowVectorXd::Zero(c.size());
      Mat gram = c.transpose() * c;
      for (size_t i = 0; i < wq.size(); ++i) {
        double s = ps.at(wq[i]).value(0, 0) * ps.at(wk[i]).value(0, 0);
        Mat sc = s * gram;
        Mat a(sc.rows(), sc.cols());
        for (int r = 0; r < sc.rows(); ++r) {
          Eigen::ArrayXd e = (sc.row(r).array() - sc.row(r).maxCoeff()).exp();
          a.row(r) = (e / e.sum()).matrix();
        }
        Eigen::RowVectorXd v = ps.at(wv[i]).value(0, 0) * c;
        attn += ps.at(wo[i]).value(0, 0) * (a * v.transpose()).transpose();
      }
      Eigen::RowVectorXd m = c + attn;
      return m.unaryExpr([](double u) {
        return 0.5 * u * (1.0 + std::erf(u / 1.4142135623730951));
      });
    }
  };

  DetectorSpec spec_;
  std::vector<Stage> stages_;
  int head_w_ = -1, head_b_ = -1;
};

// ---- loss ----

struct DetectorLossConfig {
  double alpha_uncertainty = 0.1;
  int grad_accum_steps = 1;

  void validate() const {
    if (alpha_uncertainty < 0)
      throw ConfigError("detector.alpha_uncertainty must be >= 0");
    if (grad_accum_steps < 1)
      throw ConfigError("detector.grad_accum_steps must be >= 1");
  }
};

inline double prediction_entropy(const Eigen::VectorXd& probs) {
  double sum = probs.sum();
  if (std::abs(sum - 1.0) > 1e-9)
    throw std::domain_error("prediction_entropy: probabilities must sum to 1");
  double h = 0.0;
  for (int i = 0; i < probs.size(); ++i) {
    if (probs(i) < 0.0)
      throw std::domain_error("prediction_entropy: negative probability");
    if (probs(i) > 0.0) h -= probs(i) * std::log(probs(i));
  }
  return h;
}

// (mean cross-entropy - alpha * mean prediction entropy) / grad_accum_steps
inline ad::Var detector_loss(ad::Tape& t, ad::Var logits,
                             const std::vector<int>& labels,
                             const DetectorLossConfig& cfg) {
  cfg.validate();
  ad::Var lse = t.logsumexp_rows(logits);
  ad::Var sel = t.select_cols(logits, labels);
  ad::Var ce = t.scale(t.mean_all(t.sub(sel, lse)), -1.0);
  ad::Var sm = t.softmax_rows(logits);
  ad::Var ent = t.mean_all(t.sub(lse, t.rowsum(t.mul(sm, logits))));
  ad::Var loss = t.sub(ce, t.scale(ent, cfg.alpha_uncertainty));
  return t.scale(loss, 1.0 / cfg.grad_accum_steps);
}

inline double detector_loss_value(const Mat& logits,
                                  const std::vector<int>& labels,
                                  const DetectorLossConfig& cfg) {
  ad::Tape t;
  return t.val(detector_loss(t, t.input(logits), labels, cfg))(0, 0);
}

// ---- training ----

struct LabeledWindow {
  WindowPair window;
  int label = 0;  // 0 benign, 1 jammed
};

struct DetectorTrainConfig {
  FeaturePipelineConfig pipeline;
  std::vector<int> encoder_widths = {32, 16, 8};
  int heads = 2;
  DetectorLossConfig loss;
  int steps = 300;
  int batch = 32;
  double lr = 3e-3;
  double val_fraction = 0.2;

  void validate() const {
    pipeline.validate();
    loss.validate();
    if (steps < 1) throw ConfigError("detector.steps must be >= 1");
    if (batch < 1) throw ConfigError("detector.batch must be >= 1");
    if (lr <= 0) throw ConfigError("detector.lr must be > 0");
    if (!(val_fraction > 0.0 && val_fraction < 1.0))
      throw ConfigError("detector.val_fraction must lie in (0,1)");
  }
};

struct DetectorModel {
  FeaturePipeline pipeline;
  nn::ParamStore store;
  DetectorNet net;
  double val_accuracy = 0.0;
  double margin_benign = 0.0;  // mean l1 - l2 on benign validation rows
  double margin_jam = 0.0;     // mean l2 - l1 on jammed validation rows
};

inline DetectorModel train_detector(const std::vector<LabeledWindow>& data,
                                    const DetectorTrainConfig& cfg, Rng& rng) {
  cfg.validate();
  bool has0 = false, has1 = false;
  for (const auto& d : data) (d.label == 0 ? has0 : has1) = true;
  if (!has0 || !has1)
    throw std::domain_error("train_detector: need both classes present");

  std::vector<int> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  for (int i = static_cast<int>(order.size()) - 1; i > 0; --i)
    std::swap(order[i], order[rng.uniform_int(i + 1)]);
  int n_val = std::max<int>(1, static_cast<int>(data.size() * cfg.val_fraction));
  int n_train = static_cast<int>(data.size()) - n_val;
  if (n_train < 1) throw std::domain_error("train_detector: too little data");

  DetectorModel model;
  model.pipeline = FeaturePipeline(cfg.pipeline);
  std::vector<WindowPair> fit_wins;
  for (int i = 0; i < n_train; ++i)
    fit_wins.push_back(data[order[i]].window);
  model.pipeline.fit(fit_wins);

  auto featurize = [&](int idx) {
    return model.pipeline.project(data[idx].window);
  };
  Mat x_train(n_train, cfg.pipeline.feature_count());
  std::vector<int> y_train(n_train);
  for (int i = 0; i < n_train; ++i) {
    x_train.row(i) = featurize(order[i]);
    y_train[i] = data[order[i]].label;
  }
  Mat x_val(n_val, cfg.pipeline.feature_count());
  std::vector<int> y_val(n_val);
  for (int i = 0; i < n_val; ++i) {
    x_val.row(i) = featurize(order[n_train + i]);
    y_val[i] = data[order[n_train + i]].label;
  }

  DetectorSpec spec;
  spec.input_dim = cfg.pipeline.feature_count();
  spec.encoder_widths = cfg.encoder_widths;
  spec.heads = cfg.heads;
  model.net = DetectorNet::create(model.store, "det", spec, rng);
  nn::Adam adam(model.store);

  const int g = cfg.loss.grad_accum_steps;
  std::vector<nn::Mat> acc;
  int acc_count = 0;
  for (int step = 0; step < cfg.steps; ++step) {
    Mat xb(std::min(cfg.batch, n_train), x_train.cols());
    std::vector<int> yb(xb.rows());
    for (int i = 0; i < xb.rows(); ++i) {
      int r = rng.uniform_int(n_train);
      xb.row(i) = x_train.row(r);
      yb[i] = y_train[r];
    }
    ad::Tape t;
    nn::TapeBinding bind = nn::bind(t, model.store);
    ad::Var logits = model.net.forward(t, bind, t.input(xb));
    ad::Var loss = detector_loss(t, logits, yb, cfg.loss);
    t.backward(loss);
    std::vector<nn::Mat> grads = nn::collect_grads(t, bind);
    if (acc.empty()) {
      acc = std::move(grads);
    } else {
      for (size_t i = 0; i < acc.size(); ++i) acc[i] += grads[i];
    }
    if (++acc_count == g) {
      adam.step(model.store, acc, cfg.lr);
      acc.clear();
      acc_count = 0;
    }
  }
  if (acc_count > 0) adam.step(model.store, acc, cfg.lr);

  int correct = 0;
  double mb = 0.0, mj = 0.0;
  int nb = 0, nj = 0;
  for (int i = 0; i < n_val; ++i) {
    Eigen::RowVectorXd lg = model.net.infer_row(model.store, x_val.row(i));
    int pred = lg(0) >= lg(1) ? 0 : 1;
    if (pred == y_val[i]) ++correct;
    if (y_val[i] == 0) {
      mb += lg(0) - lg(1);
      ++nb;
    } else {
      mj += lg(1) - lg(0);
      ++nj;
    }
  }
  model.val_accuracy = static_cast<double>(correct) / n_val;
  model.margin_benign = nb > 0 ? mb / nb : 0.0;
  model.margin_jam = nj > 0 ? mj / nj : 0.0;
  return model;
}

// Frozen inference adapter feeding logits into agent observations.
class DetectorRuntime : public LogitSource {
 public:
  explicit DetectorRuntime(DetectorModel model) : model_(std::move(model)) {}

  std::pair<double, double> score(
      const std::vector<double>& rssi_dbm,
      const std::vector<double>& sinr_db) const override {
    WindowPair w = FeaturePipeline::cut(rssi_dbm, sinr_db, 0,
                                        model_.pipeline.config().window_len);
    Eigen::RowVectorXd f = model_.pipeline.project(w);
    Eigen::RowVectorXd lg = model_.net.infer_row(model_.store, f);
    return {lg(0), lg(1)};
  }

  int window_len() const override {
    return model_.pipeline.config().window_len;
  }

  const DetectorModel& model() const { return model_; }

 private:
  DetectorModel model_;
};

}  // namespace jamshield::detector
