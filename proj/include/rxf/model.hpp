#pragma once

// Small transformer encoder with three heads:
//   NRC  sigmoid over h_[CLS]                      (is there any relation?)
//   EC   per-position sigmoid                      (is this token important?)
//   RC   softmax over [mean(ctx) ; mean(subj) ; mean(obj)]
// The RC only sees context positions marked by an explanation mask.
//
// Every forward step keeps what its backward step needs, so gradients are
// computed exactly by hand; there is no autodiff tape.

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rxf/corpus.hpp"
#include "rxf/error.hpp"
#include "rxf/explanation.hpp"
#include "rxf/keyed_config.hpp"
#include "rxf/masking.hpp"
#include "rxf/rng.hpp"

namespace rxf {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVec = Eigen::RowVectorXd;

struct ModelConfig {
  int d = 64;
  int layers = 2;
  int heads = 4;
  int ff_mult = 4;
  double dropout = 0.1;
  std::uint64_t seed = 13;
  double lr = 3e-4;
  double weight_decay = 0.01;
  int batch_size = 16;
  int max_seq_len = 64;
  double warmup_frac = 0.1;
  bool use_nrc = true;  // false: NO_RELATION becomes an extra RC class
  bool use_ec = true;   // false: the RC pools over every context token

  int head_dim() const { return d / heads; }
  int ff_width() const { return d * ff_mult; }

  void validate() const {
    if (d <= 0 || layers < 0 || heads <= 0 || ff_mult <= 0) throw ConfigError("model sizes must be positive");
    if (d % heads != 0) throw ConfigError("d must be divisible by heads");
    if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must lie in [0, 1)");
    if (batch_size <= 0) throw ConfigError("batch_size must be positive");
    if (max_seq_len <= 1) throw ConfigError("max_seq_len must exceed 1");
    if (lr < 0.0 || weight_decay < 0.0) throw ConfigError("lr and weight_decay must be non-negative");
    if (warmup_frac < 0.0 || warmup_frac > 1.0) throw ConfigError("warmup_frac must lie in [0, 1]");
  }

  void read(const KeyedConfig& c) {
    d = c.get("d", d);
    layers = c.get("layers", layers);
    heads = c.get("heads", heads);
    ff_mult = c.get("ff_mult", ff_mult);
    dropout = c.get("dropout", dropout);
    seed = c.get("seed", seed);
    lr = c.get("lr", lr);
    weight_decay = c.get("weight_decay", weight_decay);
    batch_size = c.get("batch_size", batch_size);
    max_seq_len = c.get("max_seq_len", max_seq_len);
    warmup_frac = c.get("warmup_frac", warmup_frac);
    use_nrc = c.get("use_nrc", use_nrc);
    use_ec = c.get("use_ec", use_ec);
  }

  void write(KeyedConfig& c) const {
    auto num = [](double v) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.17g", v);
      return std::string(buf);
    };
    c.set("d", std::to_string(d));
    c.set("layers", std::to_string(layers));
    c.set("heads", std::to_string(heads));
    c.set("ff_mult", std::to_string(ff_mult));
    c.set("dropout", num(dropout));
    c.set("seed", std::to_string(seed));
    c.set("lr", num(lr));
    c.set("weight_decay", num(weight_decay));
    c.set("batch_size", std::to_string(batch_size));
    c.set("max_seq_len", std::to_string(max_seq_len));
    c.set("warmup_frac", num(warmup_frac));
    c.set("use_nrc", use_nrc ? "true" : "false");
    c.set("use_ec", use_ec ? "true" : "false");
  }
};

struct LayerParams {
  Mat ln1_g, ln1_b;
  Mat wq, bq, wk, bk, wv, bv, wo, bo;
  Mat ln2_g, ln2_b;
  Mat w1, b1, w2, b2;
};

struct ModelParams {
  Mat tok_emb;  // vocab x d
  Mat pos_emb;  // max_seq_len x d
  std::vector<LayerParams> layers;
  Mat nrc_w, nrc_b;  // 1 x d, 1 x 1
  Mat ec_w, ec_b;    // 1 x d, 1 x 1
  Mat rc_w, rc_b;    // 3d x C, 1 x C

  /// Visits every tensor in declaration order: f(name, tensor, decayed).
  template <typename F>
  void for_each(F&& f) {
    visit(*this, f);
  }
  template <typename F>
  void for_each(F&& f) const {
    visit(*this, f);
  }

  ModelParams zeros_like() const {
    ModelParams z = *this;
    z.for_each([](const std::string&, Mat& m, bool) { m.setZero(); });
    return z;
  }

  std::size_t count() const {
    std::size_t n = 0;
    for_each([&](const std::string&, const Mat& m, bool) { n += m.size(); });
    return n;
  }

  bool all_finite() const {
    bool ok = true;
    for_each([&](const std::string&, const Mat& m, bool) { ok = ok && m.allFinite(); });
    return ok;
  }

 private:
  template <typename Self, typename F>
  static void visit(Self& s, F& f) {
    f("tok_emb", s.tok_emb, true);
    f("pos_emb", s.pos_emb, true);
    for (std::size_t l = 0; l < s.layers.size(); ++l) {
      auto& L = s.layers[l];
      const std::string p = "layer" + std::to_string(l) + ".";
      f(p + "ln1_g", L.ln1_g, false);
      f(p + "ln1_b", L.ln1_b, false);
      f(p + "wq", L.wq, true);
      f(p + "bq", L.bq, false);
      f(p + "wk", L.wk, true);
      f(p + "bk", L.bk, false);
      f(p + "wv", L.wv, true);
      f(p + "bv", L.bv, false);
      f(p + "wo", L.wo, true);
      f(p + "bo", L.bo, false);
      f(p + "ln2_g", L.ln2_g, false);
      f(p + "ln2_b", L.ln2_b, false);
      f(p + "w1", L.w1, true);
      f(p + "b1", L.b1, false);
      f(p + "w2", L.w2, true);
      f(p + "b2", L.b2, false);
    }
    f("nrc_w", s.nrc_w, true);
    f("nrc_b", s.nrc_b, false);
    f("ec_w", s.ec_w, true);
    f("ec_b", s.ec_b, false);
    f("rc_w", s.rc_w, true);
    f("rc_b", s.rc_b, false);
  }
};

/// Zero-initialised parameters with the shapes implied by the configuration.
inline ModelParams make_params(const ModelConfig& cfg, int vocab_size, int num_classes) {
  const int d = cfg.d, f = cfg.ff_width();
  ModelParams p;
  p.tok_emb = Mat::Zero(vocab_size, d);
  p.pos_emb = Mat::Zero(cfg.max_seq_len, d);
  p.layers.resize(cfg.layers);
  for (auto& L : p.layers) {
    L.ln1_g = Mat::Ones(1, d);
    L.ln1_b = Mat::Zero(1, d);
    L.wq = L.wk = L.wv = L.wo = Mat::Zero(d, d);
    L.bq = L.bk = L.bv = L.bo = Mat::Zero(1, d);
    L.ln2_g = Mat::Ones(1, d);
    L.ln2_b = Mat::Zero(1, d);
    L.w1 = Mat::Zero(d, f);
    L.b1 = Mat::Zero(1, f);
    L.w2 = Mat::Zero(f, d);
    L.b2 = Mat::Zero(1, d);
  }
  p.nrc_w = Mat::Zero(1, d);
  p.nrc_b = Mat::Zero(1, 1);
  p.ec_w = Mat::Zero(1, d);
  p.ec_b = Mat::Zero(1, 1);
  p.rc_w = Mat::Zero(3 * d, num_classes);
  p.rc_b = Mat::Zero(1, num_classes);
  return p;
}

inline void init_params(ModelParams& p, Rng& rng) {
  auto fill = [&](Mat& m, double std) {
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = std * rng.normal();
  };
  const double d = static_cast<double>(p.tok_emb.cols());
  fill(p.tok_emb, 1.0 / std::sqrt(d));
  fill(p.pos_emb, 0.1 / std::sqrt(d));
  for (auto& L : p.layers) {
    for (Mat* w : {&L.wq, &L.wk, &L.wv, &L.wo, &L.w1}) fill(*w, 1.0 / std::sqrt(d));
    fill(L.w2, 1.0 / std::sqrt(static_cast<double>(L.w2.rows())));
  }
  fill(p.nrc_w, 1.0 / std::sqrt(d));
  fill(p.ec_w, 1.0 / std::sqrt(d));
  fill(p.rc_w, 1.0 / std::sqrt(static_cast<double>(p.rc_w.rows())));
}

// ---------------------------------------------------------------------------
// Building blocks

inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

/// Binary cross entropy of sigmoid(logit) against target t, computed stably.
inline double bce_with_logit(double logit, double t) {
  return std::max(logit, 0.0) - logit * t + std::log1p(std::exp(-std::abs(logit)));
}

inline RowVec softmax(const RowVec& z) {
  RowVec e = (z.array() - z.maxCoeff()).exp();
  return e / e.sum();
}

inline constexpr double kLnEps = 1e-5;

struct LayerNormCache {
  Mat xhat;
  Eigen::VectorXd inv_std;
};

inline Mat layer_norm(const Mat& x, const Mat& g, const Mat& b, LayerNormCache* cache) {
  const auto n = x.rows();
  Mat xhat(n, x.cols());
  Eigen::VectorXd inv(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double mu = x.row(i).mean();
    RowVec c = x.row(i).array() - mu;
    double var = c.squaredNorm() / static_cast<double>(x.cols());
    inv(i) = 1.0 / std::sqrt(var + kLnEps);
    xhat.row(i) = c * inv(i);
  }
  Mat y = (xhat.array().rowwise() * g.row(0).array()).matrix();
  y.rowwise() += b.row(0);
  if (cache) *cache = {std::move(xhat), std::move(inv)};
  return y;
}

inline Mat layer_norm_backward(const Mat& dy, const Mat& g, const LayerNormCache& c, Mat& dg, Mat& db) {
  dg.row(0) += (dy.array() * c.xhat.array()).colwise().sum().matrix();
  db.row(0) += dy.colwise().sum();
  Mat dxhat = (dy.array().rowwise() * g.row(0).array()).matrix();
  Mat dx(dy.rows(), dy.cols());
  const double m = static_cast<double>(dy.cols());
  for (Eigen::Index i = 0; i < dy.rows(); ++i) {
    double mean_d = dxhat.row(i).sum() / m;
    double mean_dx = dxhat.row(i).dot(c.xhat.row(i)) / m;
    dx.row(i) = c.inv_std(i) * (dxhat.row(i).array() - mean_d - c.xhat.row(i).array() * mean_dx).matrix();
  }
  return dx;
}

inline constexpr double kGeluC = 0.7978845608028654;  // sqrt(2 / pi)

inline double gelu(double u) { return 0.5 * u * (1.0 + std::tanh(kGeluC * (u + 0.044715 * u * u * u))); }

inline double gelu_grad(double u) {
  double t = std::tanh(kGeluC * (u + 0.044715 * u * u * u));
  return 0.5 * (1.0 + t) + 0.5 * u * (1.0 - t * t) * kGeluC * (1.0 + 3.0 * 0.044715 * u * u);
}

enum class Mode { Train, Infer };

// ---------------------------------------------------------------------------
// Encoder

struct LayerCache {
  Mat x_in;
  LayerNormCache ln1;
  Mat a, q, k, v;
  std::vector<Mat> probs;  // per head, n x n
  Mat o;
  Mat drop_attn;  // empty when dropout is inactive
  Mat x_mid;
  LayerNormCache ln2;
  Mat b, u;
  Mat drop_ff;
};

struct EncoderCache {
  std::vector<int> ids;
  Mat drop_emb;
  std::vector<LayerCache> layers;
};

struct EncoderOutput {
  Mat h;                                   // n x d, row 0 is [CLS]
  std::vector<std::vector<Mat>> attention;  // [layer][head] n x n, rows sum to 1

  int size() const { return static_cast<int>(h.rows()); }
};

namespace detail {

inline Mat dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, Rng& rng) {
  Mat m(rows, cols);
  const double keep = 1.0 - rate;
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform() < keep ? 1.0 / keep : 0.0;
  return m;
}

inline bool dropout_active(const ModelConfig& cfg, Mode mode, Rng* rng) {
  return mode == Mode::Train && cfg.dropout > 0.0 && rng != nullptr;
}

}  // namespace detail

/// Forward pass. In train mode dropout masks are drawn from `rng`.
inline EncoderOutput encode(const ModelParams& p, const ModelConfig& cfg, std::span<const int> ids, Mode mode,
                            Rng* rng = nullptr, EncoderCache* cache = nullptr) {
  const int n = static_cast<int>(ids.size());
  if (n > cfg.max_seq_len)
    throw ValidationError("sequence of length " + std::to_string(n) + " exceeds max_seq_len " +
                          std::to_string(cfg.max_seq_len) + "; truncate before encoding");
  const int d = cfg.d, dh = cfg.head_dim();
  const bool drop = detail::dropout_active(cfg, mode, rng);
  EncoderOutput out;

  Mat x(n, d);
  for (int i = 0; i < n; ++i) {
    if (ids[i] < 0 || ids[i] >= p.tok_emb.rows()) throw ValidationError("token id out of vocabulary range");
    x.row(i) = p.tok_emb.row(ids[i]) + p.pos_emb.row(i);
  }
  if (cache) {
    cache->ids.assign(ids.begin(), ids.end());
    cache->layers.clear();
    cache->drop_emb.resize(0, 0);
  }
  if (drop) {
    Mat m = detail::dropout_mask(n, d, cfg.dropout, *rng);
    x = x.cwiseProduct(m);
    if (cache) cache->drop_emb = std::move(m);
  }

  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  for (const auto& L : p.layers) {
    LayerCache lc;
    lc.x_in = x;
    Mat a = layer_norm(x, L.ln1_g, L.ln1_b, &lc.ln1);
    Mat q = a * L.wq;
    q.rowwise() += L.bq.row(0);
    Mat k = a * L.wk;
    k.rowwise() += L.bk.row(0);
    Mat v = a * L.wv;
    v.rowwise() += L.bv.row(0);
    Mat o(n, d);
    std::vector<Mat> probs;
    for (int h = 0; h < cfg.heads; ++h) {
      Mat s = q.middleCols(h * dh, dh) * k.middleCols(h * dh, dh).transpose() * scale;
      for (int i = 0; i < n; ++i) s.row(i) = softmax(s.row(i));
      o.middleCols(h * dh, dh) = s * v.middleCols(h * dh, dh);
      probs.push_back(std::move(s));
    }
    Mat z = o * L.wo;
    z.rowwise() += L.bo.row(0);
    if (drop) {
      lc.drop_attn = detail::dropout_mask(n, d, cfg.dropout, *rng);
      z = z.cwiseProduct(lc.drop_attn);
    }
    Mat x_mid = x + z;

    Mat b = layer_norm(x_mid, L.ln2_g, L.ln2_b, &lc.ln2);
    Mat u = b * L.w1;
    u.rowwise() += L.b1.row(0);
    Mat g = u.unaryExpr([](double t) { return gelu(t); });
    Mat f = g * L.w2;
    f.rowwise() += L.b2.row(0);
    if (drop) {
      lc.drop_ff = detail::dropout_mask(n, d, cfg.dropout, *rng);
      f = f.cwiseProduct(lc.drop_ff);
    }
    x = x_mid + f;

    out.attention.push_back(probs);
    if (cache) {
      lc.a = std::move(a);
      lc.q = std::move(q);
      lc.k = std::move(k);
      lc.v = std::move(v);
      lc.probs = std::move(probs);
      lc.o = std::move(o);
      lc.x_mid = std::move(x_mid);
      lc.b = std::move(b);
      lc.u = std::move(u);
      cache->layers.push_back(std::move(lc));
    }
  }
  out.h = std::move(x);
  return out;
}

/// Accumulates parameter gradients for dL/dH into `grads`; returns dL/d(input
/// embedding rows), i.e. the gradient with respect to tok_emb[id_i] + pos_emb[i].
inline Mat encode_backward(const ModelParams& p, const ModelConfig& cfg, const EncoderCache& cache, Mat dx,
                           ModelParams& grads) {
  const int n = static_cast<int>(dx.rows());
  const int dh = cfg.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  for (int l = static_cast<int>(p.layers.size()) - 1; l >= 0; --l) {
    const auto& L = p.layers[l];
    const auto& c = cache.layers[l];
    auto& G = grads.layers[l];

    // Feedforward sublayer: x = x_mid + drop(gelu(b W1 + b1) W2 + b2)
    Mat df = c.drop_ff.size() ? Mat(dx.cwiseProduct(c.drop_ff)) : dx;
    Mat g = c.u.unaryExpr([](double t) { return gelu(t); });
    G.w2 += g.transpose() * df;
    G.b2.row(0) += df.colwise().sum();
    Mat dg = df * L.w2.transpose();
    Mat du = dg.cwiseProduct(c.u.unaryExpr([](double t) { return gelu_grad(t); }));
    G.w1 += c.b.transpose() * du;
    G.b1.row(0) += du.colwise().sum();
    Mat db = du * L.w1.transpose();
    Mat dx_mid = dx + layer_norm_backward(db, L.ln2_g, c.ln2, G.ln2_g, G.ln2_b);

    // Attention sublayer: x_mid = x_in + drop(attn(LN(x_in)) Wo + bo)
    Mat dz = c.drop_attn.size() ? Mat(dx_mid.cwiseProduct(c.drop_attn)) : dx_mid;
    G.wo += c.o.transpose() * dz;
    G.bo.row(0) += dz.colwise().sum();
    Mat d_o = dz * L.wo.transpose();
    Mat dq(n, cfg.d), dk(n, cfg.d), dv(n, cfg.d);
    for (int h = 0; h < cfg.heads; ++h) {
      const Mat& P = c.probs[h];
      Mat dOh = d_o.middleCols(h * dh, dh);
      Mat dP = dOh * c.v.middleCols(h * dh, dh).transpose();
      dv.middleCols(h * dh, dh) = P.transpose() * dOh;
      Mat dS(n, n);
      for (int i = 0; i < n; ++i) {
        double dot = dP.row(i).dot(P.row(i));
        dS.row(i) = P.row(i).cwiseProduct((dP.row(i).array() - dot).matrix());
      }
      dS *= scale;
      dq.middleCols(h * dh, dh) = dS * c.k.middleCols(h * dh, dh);
      dk.middleCols(h * dh, dh) = dS.transpose() * c.q.middleCols(h * dh, dh);
    }
    G.wq += c.a.transpose() * dq;
    G.bq.row(0) += dq.colwise().sum();
    G.wk += c.a.transpose() * dk;
    G.bk.row(0) += dk.colwise().sum();
    G.wv += c.a.transpose() * dv;
    G.bv.row(0) += dv.colwise().sum();
    Mat da = dq * L.wq.transpose() + dk * L.wk.transpose() + dv * L.wv.transpose();
    dx = dx_mid + layer_norm_backward(da, L.ln1_g, c.ln1, G.ln1_g, G.ln1_b);
  }
  if (cache.drop_emb.size()) dx = dx.cwiseProduct(cache.drop_emb);
  for (int i = 0; i < n; ++i) {
    grads.tok_emb.row(cache.ids[i]) += dx.row(i);
    grads.pos_emb.row(i) += dx.row(i);
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Heads

inline double nrc_logit(const ModelParams& p, const Mat& h) { return h.row(0).dot(p.nrc_w.row(0)) + p.nrc_b(0, 0); }

/// NRC probability that the instance holds some relation.
inline double nrc_score(const ModelParams& p, const Mat& h) { return sigmoid(nrc_logit(p, h)); }

inline Eigen::VectorXd ec_logits(const ModelParams& p, const Mat& h) {
  Eigen::VectorXd z = h * p.ec_w.row(0).transpose();
  return z.array() + p.ec_b(0, 0);
}

/// Raw EC probabilities for every masked position, [CLS] and entities included.
inline std::vector<double> ec_raw_scores(const ModelParams& p, const Mat& h) {
  Eigen::VectorXd z = ec_logits(p, h);
  std::vector<double> out(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) out[i] = sigmoid(z(i));
  return out;
}

/// EC probabilities with [CLS] and entity positions clamped to 0.
inline std::vector<double> ec_scores(const ModelParams& p, const Mat& h, const RelationInstance& inst) {
  auto s = ec_raw_scores(p, h);
  auto mask = context_mask(inst);
  for (std::size_t i = 0; i < s.size(); ++i)
    if (!mask[i]) s[i] = 0.0;
  return s;
}

/// Average pooling f over the rows in `positions`; the zero vector for an empty set.
inline RowVec pool_rows(const Mat& h, const std::vector<int>& positions) {
  RowVec out = RowVec::Zero(h.cols());
  if (positions.empty()) return out;
  for (int i : positions) out += h.row(i);
  return out / static_cast<double>(positions.size());
}

struct RcPooling {
  std::vector<int> ctx, subj, obj;  // masked positions
};

inline RcPooling rc_pooling(const RelationInstance& inst, const std::vector<std::uint8_t>& expl) {
  RcPooling r;
  for (int i = 0; i < inst.size(); ++i) {
    int pos = i + 1;
    if (inst.subj.contains(i)) r.subj.push_back(pos);
    else if (inst.obj.contains(i)) r.obj.push_back(pos);
    else if (pos < static_cast<int>(expl.size()) && expl[pos]) r.ctx.push_back(pos);
  }
  return r;
}

/// h_final = f(ctx) ; f(subj) ; f(obj), width 3d.
inline RowVec rc_features(const Mat& h, const RcPooling& pool) {
  const auto d = h.cols();
  RowVec f(3 * d);
  f.segment(0, d) = pool_rows(h, pool.ctx);
  f.segment(d, d) = pool_rows(h, pool.subj);
  f.segment(2 * d, d) = pool_rows(h, pool.obj);
  return f;
}

inline RowVec rc_logits(const ModelParams& p, const RowVec& features) { return features * p.rc_w + p.rc_b.row(0); }

/// Distribution over RC classes. Context enters only through positions with expl = 1.
inline RowVec rc_distribution(const ModelParams& p, const Mat& h, const std::vector<std::uint8_t>& expl,
                              const RelationInstance& inst) {
  return softmax(rc_logits(p, rc_features(h, rc_pooling(inst, expl))));
}

// ---------------------------------------------------------------------------
// Losses

struct LossParts {
  double nrc = 0.0;
  double ec = 0.0;
  double rc = 0.0;
  double total() const { return nrc + ec + rc; }
};

/// Joint loss on probabilities. EC and RC terms count only when nrc_target is 1.
/// The EC term is the mean BCE over positions with ec_mask = 1 (all when the
/// mask is empty); pass an empty ec_probs or rc_label < 0 to drop a term.
inline LossParts joint_loss(double nrc_prob, int nrc_target, std::span<const double> ec_probs,
                            std::span<const int> ec_targets, std::span<const std::uint8_t> ec_mask,
                            std::span<const double> rc_probs, int rc_label, bool use_nrc_term = true) {
  auto log_ = [](double x) { return std::log(std::max(x, 1e-300)); };
  LossParts l;
  if (use_nrc_term) l.nrc = -(nrc_target * log_(nrc_prob) + (1 - nrc_target) * log_(1.0 - nrc_prob));
  if (nrc_target != 1) return l;
  if (!ec_probs.empty()) {
    double sum = 0.0;
    int count = 0;
    for (std::size_t i = 0; i < ec_probs.size(); ++i) {
      if (!ec_mask.empty() && !ec_mask[i]) continue;
      sum += -(ec_targets[i] * log_(ec_probs[i]) + (1 - ec_targets[i]) * log_(1.0 - ec_probs[i]));
      ++count;
    }
    if (count > 0) l.ec = sum / count;
  }
  if (rc_label >= 0) l.rc = -log_(rc_probs[rc_label]);
  return l;
}

/// Supervision for one instance. Missing optionals drop the corresponding term.
struct InstanceTargets {
  std::optional<int> nrc;                       // 1 positive, 0 negative
  std::optional<std::vector<std::uint8_t>> ec;  // masked-position bits
  std::optional<int> rc;                        // class index
  std::vector<std::uint8_t> rc_mask;            // pooling mask for the RC
};

/// Loss for one instance; when `grads` is given, adds d(loss)/d(params) * weight.
inline LossParts instance_loss(const ModelParams& p, const ModelConfig& cfg, const RelationInstance& inst,
                               std::span<const int> ids, const InstanceTargets& t, Mode mode, Rng* rng,
                               ModelParams* grads, double weight = 1.0) {
  EncoderCache cache;
  EncoderOutput enc = encode(p, cfg, ids, mode, rng, grads ? &cache : nullptr);
  const Mat& h = enc.h;
  const auto n = h.rows();
  const auto d = h.cols();
  LossParts loss;
  Mat dh = grads ? Mat::Zero(n, d) : Mat();

  if (t.nrc) {
    double z = nrc_logit(p, h);
    loss.nrc = bce_with_logit(z, *t.nrc);
    if (grads) {
      double dz = weight * (sigmoid(z) - *t.nrc);
      grads->nrc_w.row(0) += dz * h.row(0);
      grads->nrc_b(0, 0) += dz;
      dh.row(0) += dz * p.nrc_w.row(0);
    }
  }
  if (t.ec) {
    auto mask = context_mask(inst);
    Eigen::VectorXd z = ec_logits(p, h);
    int count = 0;
    for (auto m : mask) count += m;
    if (count > 0) {
      double sum = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (!mask[i]) continue;
        double target = (*t.ec)[i];
        sum += bce_with_logit(z(i), target);
        if (grads) {
          double dz = weight * (sigmoid(z(i)) - target) / count;
          grads->ec_w.row(0) += dz * h.row(i);
          grads->ec_b(0, 0) += dz;
          dh.row(i) += dz * p.ec_w.row(0);
        }
      }
      loss.ec = sum / count;
    }
  }
  if (t.rc) {
    RcPooling pool = rc_pooling(inst, t.rc_mask);
    RowVec feats = rc_features(h, pool);
    RowVec prob = softmax(rc_logits(p, feats));
    loss.rc = -std::log(std::max(prob(*t.rc), 1e-300));
    if (grads) {
      RowVec dz = prob;
      dz(*t.rc) -= 1.0;
      dz *= weight;
      grads->rc_w += feats.transpose() * dz;
      grads->rc_b.row(0) += dz;
      RowVec dfeat = dz * p.rc_w.transpose();
      auto spread = [&](const std::vector<int>& rows, Eigen::Index offset) {
        if (rows.empty()) return;
        RowVec g = dfeat.segment(offset, d) / static_cast<double>(rows.size());
        for (int r : rows) dh.row(r) += g;
      };
      spread(pool.ctx, 0);
      spread(pool.subj, d);
      spread(pool.obj, 2 * d);
    }
  }
  if (grads) encode_backward(p, cfg, cache, std::move(dh), *grads);
  return loss;
}

// ---------------------------------------------------------------------------
// Optimizer

/// Adam with decoupled weight decay.
struct AdamW {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long step = 0;
  ModelParams m, v;

  explicit AdamW(const ModelParams& shape) : m(shape.zeros_like()), v(shape.zeros_like()) {}

  void update(ModelParams& params, const ModelParams& grads, double lr, double weight_decay) {
    ++step;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
    std::vector<Mat*> ps, ms, vs;
    std::vector<const Mat*> gs;
    std::vector<bool> decay;
    params.for_each([&](const std::string&, Mat& t, bool dec) {
      ps.push_back(&t);
      decay.push_back(dec);
    });
    m.for_each([&](const std::string&, Mat& t, bool) { ms.push_back(&t); });
    v.for_each([&](const std::string&, Mat& t, bool) { vs.push_back(&t); });
    grads.for_each([&](const std::string&, const Mat& t, bool) { gs.push_back(&t); });
    for (std::size_t i = 0; i < ps.size(); ++i) {
      Mat& P = *ps[i];
      const Mat& G = *gs[i];
      *ms[i] = beta1 * *ms[i] + (1.0 - beta1) * G;
      *vs[i] = beta2 * *vs[i] + (1.0 - beta2) * G.cwiseProduct(G);
      Mat upd = (ms[i]->array() / c1) / ((vs[i]->array() / c2).sqrt() + eps);
      if (decay[i]) upd += weight_decay * P;
      P -= lr * upd;
    }
  }
};

/// Linear warmup over the first warmup_frac of steps, then linear decay to zero.
inline double scheduled_lr(double base, long step, long total_steps, double warmup_frac) {
  if (total_steps <= 0) return base;
  long warm = static_cast<long>(std::ceil(warmup_frac * static_cast<double>(total_steps)));
  if (warm > 0 && step < warm) return base * static_cast<double>(step + 1) / static_cast<double>(warm);
  long rest = total_steps - warm;
  if (rest <= 0) return base;
  return base * std::max(0.0, static_cast<double>(total_steps - step) / static_cast<double>(rest));
}

}  // namespace rxf
