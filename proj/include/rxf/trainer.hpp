#pragma once

// Burn-in + semi-supervised training. During burn-in only rule-annotated
// positives supervise the EC and RC; afterwards every positive does, with
// latent explanation labels chosen among thresholded EC candidates by how well
// they let the RC recover the gold relation.

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "rxf/corpus.hpp"
#include "rxf/eval.hpp"
#include "rxf/explanation.hpp"
#include "rxf/keyed_config.hpp"
#include "rxf/model.hpp"
#include "rxf/relation_model.hpp"

namespace rxf {

struct TrainConfig {
  double t_up = 0.8;
  double t_low = 0.2;
  int burn_in_epochs = 4;
  int total_epochs = 12;
  int candidate_cap = 256;
  double nrc_threshold = 0.5;
  ModelConfig model;

  void validate() const {
    if (!(t_low > 0.0 && t_low < 1.0 && t_up > 0.0 && t_up < 1.0)) throw ConfigError("thresholds must lie in (0, 1)");
    if (!(t_low < t_up)) throw ConfigError("t_low must be below t_up");
    if (candidate_cap < 1) throw ConfigError("candidate_cap must be at least 1");
    if (burn_in_epochs < 0 || total_epochs < 1) throw ConfigError("epoch counts must be positive");
    if (burn_in_epochs > total_epochs) throw ConfigError("burn_in_epochs cannot exceed total_epochs");
    if (nrc_threshold <= 0.0 || nrc_threshold >= 1.0) throw ConfigError("nrc_threshold must lie in (0, 1)");
    model.validate();
  }

  static TrainConfig from(const KeyedConfig& c) {
    static const std::set<std::string> known{"t_up", "t_low", "burn_in_epochs", "total_epochs", "candidate_cap",
                                             "nrc_threshold", "d", "layers", "heads", "ff_mult", "dropout", "seed",
                                             "lr", "weight_decay", "batch_size", "max_seq_len", "warmup_frac",
                                             "use_nrc", "use_ec"};
    for (const auto& [k, _] : c.values())
      if (!known.count(k)) throw ConfigError("unknown training config key '" + k + "'");
    TrainConfig t;
    t.t_up = c.get("t_up", t.t_up);
    t.t_low = c.get("t_low", t.t_low);
    t.burn_in_epochs = c.get("burn_in_epochs", t.burn_in_epochs);
    t.total_epochs = c.get("total_epochs", t.total_epochs);
    t.candidate_cap = c.get("candidate_cap", t.candidate_cap);
    t.nrc_threshold = c.get("nrc_threshold", t.nrc_threshold);
    t.model.read(c);
    t.validate();
    return t;
  }
};

// ---------------------------------------------------------------------------
// Latent explanation search

/// Candidate label sequences for per-position EC scores. Scores above t_up are
/// fixed to 1, below t_low to 0, the rest enumerate both values (binary
/// counting over ambiguous positions, earliest position as the low bit). When
/// 2^k exceeds `cap`, the ambiguous positions farthest from 0.5 are resolved to
/// their nearer side first.
inline std::vector<ExplanationLabels> generate_candidates(std::span<const double> scores, double t_low, double t_up,
                                                          int cap) {
  const std::size_t n = scores.size();
  std::vector<std::uint8_t> base(n, 0);
  std::vector<int> ambiguous;
  for (std::size_t i = 0; i < n; ++i) {
    if (scores[i] > t_up) base[i] = 1;
    else if (scores[i] >= t_low) ambiguous.push_back(static_cast<int>(i));
  }
  auto fits = [&](std::size_t k) { return k < 31 && (std::size_t{1} << k) <= static_cast<std::size_t>(cap); };
  if (!fits(ambiguous.size())) {
    std::vector<int> order = ambiguous;
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return std::abs(scores[a] - 0.5) > std::abs(scores[b] - 0.5);
    });
    std::set<int> resolved;
    for (int pos : order) {
      if (fits(ambiguous.size() - resolved.size())) break;
      base[pos] = scores[pos] > 0.5 ? 1 : 0;
      resolved.insert(pos);
    }
    std::erase_if(ambiguous, [&](int p) { return resolved.count(p) > 0; });
  }
  const std::size_t total = std::size_t{1} << ambiguous.size();
  std::vector<ExplanationLabels> out;
  out.reserve(total);
  for (std::size_t code = 0; code < total; ++code) {
    ExplanationLabels c{base, ExplanationSource::Latent};
    for (std::size_t b = 0; b < ambiguous.size(); ++b) c.bits[ambiguous[b]] = (code >> b) & 1U;
    out.push_back(std::move(c));
  }
  return out;
}

struct Selection {
  std::size_t index = 0;
  double score = 0.0;
};

/// argmax over candidates of p(gold class | candidate); the first wins ties.
inline Selection select_candidate(const std::vector<ExplanationLabels>& cands, const RelationInstance& inst,
                                  int gold_class, const ModelParams& params, const Mat& h) {
  if (cands.empty()) throw ValidationError("select_candidate: no candidates");
  Selection best;
  best.score = -1.0;
  for (std::size_t i = 0; i < cands.size(); ++i) {
    double s = rc_distribution(params, h, cands[i].bits, inst)(gold_class);
    if (s > best.score) best = {i, s};
  }
  return best;
}

// ---------------------------------------------------------------------------
// Training

struct EpochLog {
  int epoch = 0;
  bool burn_in = true;
  LossParts loss;  // means over participating instances
  long instances = 0;
  std::optional<double> dev_f1;
  std::optional<double> mean_candidates;
};

struct TrainLog {
  std::vector<EpochLog> epochs;
  std::vector<std::string> warnings;

  std::string to_jsonl() const {
    std::string out;
    for (const auto& e : epochs) {
      nlohmann::ordered_json j;
      j["epoch"] = e.epoch;
      j["phase"] = e.burn_in ? "burn_in" : "ssl";
      j["instances"] = e.instances;
      j["loss_nrc"] = e.loss.nrc;
      j["loss_ec"] = e.loss.ec;
      j["loss_rc"] = e.loss.rc;
      j["loss_total"] = e.loss.total();
      j["dev_f1"] = e.dev_f1 ? nlohmann::ordered_json(*e.dev_f1) : nlohmann::ordered_json(nullptr);
      j["mean_candidates"] =
          e.mean_candidates ? nlohmann::ordered_json(*e.mean_candidates) : nlohmann::ordered_json(nullptr);
      out += j.dump() + "\n";
    }
    return out;
  }
};

struct TrainResult {
  RelationModel model;
  TrainLog log;
};

inline std::map<std::string, std::string> predict_labels(const RelationModel& model,
                                                         const std::vector<RelationInstance>& instances) {
  std::map<std::string, std::string> out;
  for (const auto& inst : instances) out[inst.id] = model.predict(inst).label;
  return out;
}

inline std::map<std::string, std::string> gold_labels(const std::vector<RelationInstance>& instances) {
  std::map<std::string, std::string> out;
  for (const auto& inst : instances) out[inst.id] = inst.relation;
  return out;
}

using EpochCallback = std::function<void(const EpochLog&)>;

inline TrainResult train(const Corpus& corpus, const std::map<std::string, ExplanationLabels>& rule_labels,
                         const TrainConfig& cfg, const EpochCallback& on_epoch = {}) {
  cfg.validate();
  if (corpus.vocab.empty()) throw ValidationError("cannot train on an empty corpus");
  if (corpus.relations.empty()) throw ValidationError("corpus has no positive relation labels");
  TrainResult result;
  RelationModel& model = result.model;
  model = RelationModel(cfg.model, corpus.vocab, corpus.relations);
  model.nrc_threshold = cfg.nrc_threshold;
  Rng rng(cfg.model.seed);
  model.initialize(rng);
  const ModelConfig& mc = model.config;

  if (rule_labels.empty())
    result.log.warnings.push_back("no rule annotations: burn-in trains the no-relation classifier only");

  const auto& data = corpus.train;
  std::vector<MaskedSequence> seqs;
  seqs.reserve(data.size());
  for (const auto& inst : data) {
    seqs.push_back(model.sequence(inst));
    if (seqs.back().size() > mc.max_seq_len)
      throw ValidationError("instance '" + inst.id + "' exceeds max_seq_len; truncate the corpus first");
  }
  auto annotated = [&](const RelationInstance& inst) -> const ExplanationLabels* {
    auto it = rule_labels.find(inst.id);
    return it == rule_labels.end() ? nullptr : &it->second;
  };

  // Which instances contribute anything in a given phase.
  auto participates = [&](const RelationInstance& inst, bool burn_in) {
    if (mc.use_nrc) return true;
    if (!inst.is_positive()) return true;  // RC learns the NO_RELATION class
    return !burn_in || annotated(inst) != nullptr;
  };
  long total_steps = 0;
  for (int e = 0; e < cfg.total_epochs; ++e) {
    long count = 0;
    for (const auto& inst : data) count += participates(inst, e < cfg.burn_in_epochs);
    total_steps += (count + mc.batch_size - 1) / mc.batch_size;
  }

  AdamW opt(model.params);
  long step = 0;
  for (int epoch = 0; epoch < cfg.total_epochs; ++epoch) {
    const bool burn_in = epoch < cfg.burn_in_epochs;
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < data.size(); ++i)
      if (participates(data[i], burn_in)) order.push_back(i);
    rng.shuffle(order);

    EpochLog log;
    log.epoch = epoch + 1;
    log.burn_in = burn_in;
    long cand_total = 0, cand_instances = 0;

    for (std::size_t start = 0; start < order.size(); start += mc.batch_size) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(mc.batch_size));
      const double weight = 1.0 / static_cast<double>(stop - start);
      ModelParams grads = model.params.zeros_like();
      LossParts batch_loss;
      for (std::size_t b = start; b < stop; ++b) {
        const auto& inst = data[order[b]];
        const auto& ids = seqs[order[b]].ids;
        InstanceTargets t;
        if (mc.use_nrc) t.nrc = inst.is_positive() ? 1 : 0;
        if (inst.is_positive()) {
          const int cls = model.class_index(inst.relation);
          if (const auto* rule = annotated(inst)) {
            if (mc.use_ec) t.ec = rule->bits;
            t.rc = cls;
            t.rc_mask = mc.use_ec ? rule->bits : context_mask(inst);
          } else if (!burn_in) {
            t.rc = cls;
            if (mc.use_ec) {
              auto enc = rxf::encode(model.params, mc, ids, Mode::Infer);
              auto scores = ec_scores(model.params, enc.h, inst);
              auto cands = generate_candidates(scores, cfg.t_low, cfg.t_up, cfg.candidate_cap);
              cand_total += static_cast<long>(cands.size());
              ++cand_instances;
              auto sel = select_candidate(cands, inst, cls, model.params, enc.h);
              t.ec = cands[sel.index].bits;
              t.rc_mask = cands[sel.index].bits;
            } else {
              t.rc_mask = context_mask(inst);
            }
          }
        } else if (!mc.use_nrc) {
          t.rc = model.class_index(kNoRelation);
          if (mc.use_ec) {
            auto enc = rxf::encode(model.params, mc, ids, Mode::Infer);
            t.rc_mask = model.inference_mask(inst, enc.h);
          } else {
            t.rc_mask = context_mask(inst);
          }
        }
        auto l = instance_loss(model.params, mc, inst, ids, t, Mode::Train, &rng, &grads, weight);
        batch_loss.nrc += l.nrc;
        batch_loss.ec += l.ec;
        batch_loss.rc += l.rc;
      }
      const long batch_index = step;
      if (!std::isfinite(batch_loss.total()) || !grads.all_finite())
        throw TrainingError("non-finite loss or gradient in epoch " + std::to_string(epoch + 1) + ", batch " +
                            std::to_string(batch_index) + " (first instance '" + data[order[start]].id + "')");
      log.loss.nrc += batch_loss.nrc;
      log.loss.ec += batch_loss.ec;
      log.loss.rc += batch_loss.rc;
      double lr = scheduled_lr(mc.lr, step, total_steps, mc.warmup_frac);
      opt.update(model.params, grads, lr, mc.weight_decay);
      ++step;
    }
    log.instances = static_cast<long>(order.size());
    if (log.instances > 0) {
      log.loss.nrc /= static_cast<double>(log.instances);
      log.loss.ec /= static_cast<double>(log.instances);
      log.loss.rc /= static_cast<double>(log.instances);
    }
    if (!burn_in && cand_instances > 0)
      log.mean_candidates = static_cast<double>(cand_total) / static_cast<double>(cand_instances);
    if (!corpus.dev.empty())
      log.dev_f1 = rc_micro(predict_labels(model, corpus.dev), gold_labels(corpus.dev)).f1;
    if (on_epoch) on_epoch(log);
    result.log.epochs.push_back(log);
  }
  return result;
}

}  // namespace rxf
