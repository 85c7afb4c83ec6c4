#pragma once

// A trained relation + explanation model bound to its vocabularies, with the
// inference contract and checkpoint I/O.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "rxf/corpus.hpp"
#include "rxf/explanation.hpp"
#include "rxf/masking.hpp"
#include "rxf/model.hpp"

namespace rxf {

struct Prediction {
  std::string label;
  double nrc_score = 0.0;
  ExplanationLabels rationale;
  RowVec class_probs;
};

class RelationModel {
 public:
  ModelConfig config;
  TokenVocab vocab;
  std::vector<std::string> relations;  // RC classes; NO_RELATION is appended when use_nrc is off
  ModelParams params;
  double nrc_threshold = 0.5;
  double ec_threshold = 0.5;

  RelationModel() = default;

  RelationModel(const ModelConfig& cfg, TokenVocab v, std::vector<std::string> rels)
      : config(cfg), vocab(std::move(v)), relations(std::move(rels)) {
    config.validate();
    params = make_params(config, vocab.size(), num_classes());
  }

  void initialize(Rng& rng) { init_params(params, rng); }

  int num_classes() const { return static_cast<int>(relations.size()) + (config.use_nrc ? 0 : 1); }

  std::string class_label(int c) const {
    return c < static_cast<int>(relations.size()) ? relations[c] : kNoRelation;
  }

  /// Class index of a gold label, or -1 when the RC has no such class.
  int class_index(const std::string& label) const {
    auto it = std::find(relations.begin(), relations.end(), label);
    if (it != relations.end()) return static_cast<int>(it - relations.begin());
    if (!config.use_nrc && label == kNoRelation) return static_cast<int>(relations.size());
    return -1;
  }

  MaskedSequence sequence(const RelationInstance& inst) const { return mask_entities(inst, vocab); }

  EncoderOutput encode(const RelationInstance& inst) const {
    auto seq = sequence(inst);
    return rxf::encode(params, config, seq.ids, Mode::Infer);
  }

  /// Mask the RC pools over at inference: thresholded EC output, or every
  /// context token when the EC is ablated.
  std::vector<std::uint8_t> inference_mask(const RelationInstance& inst, const Mat& h) const {
    if (!config.use_ec) return context_mask(inst);
    auto s = ec_scores(params, h, inst);
    std::vector<std::uint8_t> bits(s.size(), 0);
    for (std::size_t i = 0; i < s.size(); ++i) bits[i] = s[i] > ec_threshold ? 1 : 0;
    return bits;
  }

  Prediction predict(const RelationInstance& inst) const {
    auto enc = encode(inst);
    return predict_from(inst, enc.h);
  }

  Prediction predict_from(const RelationInstance& inst, const Mat& h) const {
    Prediction pred;
    auto mask = inference_mask(inst, h);
    pred.rationale = config.use_ec ? ExplanationLabels{mask, ExplanationSource::Predicted}
                                   : ExplanationLabels::zeros(inst, ExplanationSource::Predicted);
    pred.class_probs = rc_distribution(params, h, mask, inst);
    Eigen::Index best = 0;
    pred.class_probs.maxCoeff(&best);
    if (config.use_nrc) {
      pred.nrc_score = nrc_score(params, h);
      pred.label = pred.nrc_score < nrc_threshold ? kNoRelation : class_label(static_cast<int>(best));
    } else {
      pred.nrc_score = 1.0 - pred.class_probs(num_classes() - 1);
      pred.label = class_label(static_cast<int>(best));
    }
    return pred;
  }

  /// Last-layer [CLS] attention row averaged over heads, one weight per masked position.
  std::vector<double> cls_attention(const RelationInstance& inst) const {
    auto enc = encode(inst);
    const int n = enc.size();
    std::vector<double> out(n, 0.0);
    if (enc.attention.empty()) return out;
    const auto& last = enc.attention.back();
    for (const auto& head : last)
      for (int j = 0; j < n; ++j) out[j] += head(0, j) / static_cast<double>(last.size());
    return out;
  }

  /// Per masked position: sum of |d p(cls) / d input embedding| under the
  /// inference pooling mask.
  std::vector<double> embedding_gradients(const RelationInstance& inst, int cls) const {
    auto seq = sequence(inst);
    auto enc = rxf::encode(params, config, seq.ids, Mode::Infer);
    auto mask = inference_mask(inst, enc.h);
    return embedding_gradients(inst, cls, mask);
  }

  std::vector<double> embedding_gradients(const RelationInstance& inst, int cls,
                                          const std::vector<std::uint8_t>& mask) const {
    auto seq = sequence(inst);
    EncoderCache cache;
    auto enc = rxf::encode(params, config, seq.ids, Mode::Infer, nullptr, &cache);
    const Mat& h = enc.h;
    const auto d = h.cols();
    RcPooling pool = rc_pooling(inst, mask);
    RowVec feats = rc_features(h, pool);
    RowVec prob = softmax(rc_logits(params, feats));
    // d p_c / d z = p_c (onehot_c - p)
    RowVec dz = -prob(cls) * prob;
    dz(cls) += prob(cls);
    RowVec dfeat = dz * params.rc_w.transpose();
    Mat dh = Mat::Zero(h.rows(), d);
    auto spread = [&](const std::vector<int>& rows, Eigen::Index offset) {
      if (rows.empty()) return;
      RowVec g = dfeat.segment(offset, d) / static_cast<double>(rows.size());
      for (int r : rows) dh.row(r) += g;
    };
    spread(pool.ctx, 0);
    spread(pool.subj, d);
    spread(pool.obj, 2 * d);
    ModelParams scratch = params.zeros_like();
    Mat dx = encode_backward(params, config, cache, std::move(dh), scratch);
    std::vector<double> out(h.rows());
    for (Eigen::Index i = 0; i < h.rows(); ++i) out[i] = dx.row(i).cwiseAbs().sum();
    return out;
  }
};

// ---------------------------------------------------------------------------
// Checkpoints: "RXF1", u32 version, u32 header length, JSON header,
// u32 tensor count, then per tensor u32 rows, u32 cols, little-endian f32 data.

inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

inline void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw LoadError("checkpoint truncated");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline void put_f32(std::ostream& out, double v) {
  float f = static_cast<float>(v);
  put_u32(out, std::bit_cast<std::uint32_t>(f));
}

inline double get_f32(std::istream& in) { return static_cast<double>(std::bit_cast<float>(get_u32(in))); }

}  // namespace detail

inline void write_checkpoint(const RelationModel& model, std::ostream& out) {
  nlohmann::ordered_json header;
  KeyedConfig cfg;
  model.config.write(cfg);
  header["config"] = cfg.values();
  header["nrc_threshold"] = model.nrc_threshold;
  header["ec_threshold"] = model.ec_threshold;
  header["relations"] = model.relations;
  header["vocab"] = model.vocab.symbols();
  std::string text = header.dump();

  out.write("RXF1", 4);
  detail::put_u32(out, kCheckpointVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(text.size()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  std::uint32_t count = 0;
  model.params.for_each([&](const std::string&, const Mat&, bool) { ++count; });
  detail::put_u32(out, count);
  model.params.for_each([&](const std::string&, const Mat& m, bool) {
    detail::put_u32(out, static_cast<std::uint32_t>(m.rows()));
    detail::put_u32(out, static_cast<std::uint32_t>(m.cols()));
    for (Eigen::Index i = 0; i < m.size(); ++i) detail::put_f32(out, m.data()[i]);
  });
}

inline void save_checkpoint(const RelationModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw LoadError("cannot write checkpoint '" + path + "'");
  write_checkpoint(model, out);
}

inline RelationModel read_checkpoint(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "RXF1", 4) != 0) throw LoadError("not a checkpoint (bad magic)");
  auto version = detail::get_u32(in);
  if (version != kCheckpointVersion)
    throw LoadError("unsupported checkpoint version " + std::to_string(version));
  auto len = detail::get_u32(in);
  std::string text(len, '\0');
  if (!in.read(text.data(), len)) throw LoadError("checkpoint truncated in header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(std::string("corrupt checkpoint header: ") + e.what());
  }
  KeyedConfig cfg;
  for (const auto& [k, v] : header.at("config").items()) cfg.set(k, v.get<std::string>());
  ModelConfig mc;
  mc.read(cfg);
  RelationModel model(mc, TokenVocab(header.at("vocab").get<std::vector<std::string>>()),
                      header.at("relations").get<std::vector<std::string>>());
  model.nrc_threshold = header.at("nrc_threshold").get<double>();
  model.ec_threshold = header.at("ec_threshold").get<double>();

  auto count = detail::get_u32(in);
  std::uint32_t expected = 0;
  model.params.for_each([&](const std::string&, const Mat&, bool) { ++expected; });
  if (count != expected)
    throw LoadError("checkpoint has " + std::to_string(count) + " tensors, expected " + std::to_string(expected));
  model.params.for_each([&](const std::string& name, Mat& m, bool) {
    auto rows = detail::get_u32(in);
    auto cols = detail::get_u32(in);
    if (rows != m.rows() || cols != m.cols())
      throw LoadError("tensor '" + name + "' has shape " + std::to_string(rows) + "x" + std::to_string(cols) +
                      ", expected " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = detail::get_f32(in);
  });
  return model;
}

inline RelationModel load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open checkpoint '" + path + "'");
  return read_checkpoint(in);
}

inline std::string checkpoint_bytes(const RelationModel& model) {
  std::ostringstream out(std::ios::binary);
  write_checkpoint(model, out);
  return out.str();
}

}  // namespace rxf
