#pragma once

// Post-hoc rationale baselines over a trained model. Every method explains the
// model's own prediction: the top RC class under the inference pooling mask.

#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

#include "rxf/error.hpp"
#include "rxf/relation_model.hpp"

namespace rxf {

enum class AttributionMethod { Ours, Attention, Saliency, Occlusion, Greedy, AllBetween };

inline const char* to_string(AttributionMethod m) {
  switch (m) {
    case AttributionMethod::Ours: return "ours";
    case AttributionMethod::Attention: return "attention";
    case AttributionMethod::Saliency: return "saliency";
    case AttributionMethod::Occlusion: return "occlusion";
    case AttributionMethod::Greedy: return "greedy";
    case AttributionMethod::AllBetween: return "all-between";
  }
  return "ours";
}

inline AttributionMethod parse_attribution_method(const std::string& s) {
  for (auto m : {AttributionMethod::Ours, AttributionMethod::Attention, AttributionMethod::Saliency,
                 AttributionMethod::Occlusion, AttributionMethod::Greedy, AttributionMethod::AllBetween})
    if (s == to_string(m)) return m;
  throw ConfigError("unknown attribution method '" + s + "'");
}

namespace detail {

inline std::vector<int> context_tokens(const RelationInstance& inst) {
  std::vector<int> out;
  for (int i = 0; i < inst.size(); ++i)
    if (!inst.in_entity(i)) out.push_back(i);
  return out;
}

/// Top `n` context tokens by score (higher first, lower index on ties),
/// returned ascending. `score[i]` is indexed by original token.
inline std::vector<int> top_n(const RelationInstance& inst, const std::vector<double>& score, int n) {
  auto cand = context_tokens(inst);
  std::stable_sort(cand.begin(), cand.end(), [&](int a, int b) { return score[a] > score[b]; });
  if (n >= 0 && static_cast<std::size_t>(n) < cand.size()) cand.resize(n);
  std::sort(cand.begin(), cand.end());
  return cand;
}

struct Explained {
  EncoderOutput enc;
  std::vector<std::uint8_t> mask;
  int cls = 0;
};

inline Explained explain_target(const RelationModel& model, const RelationInstance& inst) {
  Explained e{model.encode(inst), {}, 0};
  e.mask = model.inference_mask(inst, e.enc.h);
  Eigen::Index best = 0;
  rc_distribution(model.params, e.enc.h, e.mask, inst).maxCoeff(&best);
  e.cls = static_cast<int>(best);
  return e;
}

}  // namespace detail

/// Rationale tokens (original indices, ascending) chosen by `method`. `top_n`
/// bounds the ranked methods and the greedy search (0 means unbounded for
/// greedy); it is ignored by the model's own rationale and all-between.
inline std::vector<int> explain(const RelationModel& model, const RelationInstance& inst, AttributionMethod method,
                                int top_n) {
  switch (method) {
    case AttributionMethod::Ours:
      return model.predict(inst).rationale.tokens();

    case AttributionMethod::AllBetween: {
      std::vector<int> out;
      const Span& left = inst.subj.first < inst.obj.first ? inst.subj : inst.obj;
      const Span& right = inst.subj.first < inst.obj.first ? inst.obj : inst.subj;
      const int lo = left.last, hi = right.first;
      for (int i = lo + 1; i < hi; ++i)
        if (!inst.in_entity(i)) out.push_back(i);
      return out;
    }

    case AttributionMethod::Attention: {
      auto att = model.cls_attention(inst);
      std::vector<double> score(inst.size());
      for (int i = 0; i < inst.size(); ++i) score[i] = att[i + 1];
      return detail::top_n(inst, score, top_n);
    }

    case AttributionMethod::Saliency: {
      auto target = detail::explain_target(model, inst);
      auto g = model.embedding_gradients(inst, target.cls, target.mask);
      std::vector<double> score(inst.size());
      for (int i = 0; i < inst.size(); ++i) score[i] = g[i + 1];
      return detail::top_n(inst, score, top_n);
    }

    case AttributionMethod::Occlusion: {
      auto target = detail::explain_target(model, inst);
      auto base_seq = model.sequence(inst);
      const double base = rc_distribution(model.params, target.enc.h, target.mask, inst)(target.cls);
      std::vector<double> score(inst.size(), 0.0);
      for (int i : detail::context_tokens(inst)) {
        auto ids = base_seq.ids;
        ids[i + 1] = model.vocab.unk_id();
        auto enc = rxf::encode(model.params, model.config, ids, Mode::Infer);
        score[i] = base - rc_distribution(model.params, enc.h, target.mask, inst)(target.cls);
      }
      return detail::top_n(inst, score, top_n);
    }

    case AttributionMethod::Greedy: {
      // Grow the RC pooling mask one token at a time, always taking the token
      // that raises p(predicted class) the most, until nothing raises it.
      auto target = detail::explain_target(model, inst);
      const Mat& h = target.enc.h;
      std::vector<std::uint8_t> mask(inst.size() + 1, 0);
      double current = rc_distribution(model.params, h, mask, inst)(target.cls);
      auto remaining = detail::context_tokens(inst);
      std::vector<int> chosen;
      while (!remaining.empty() && (top_n <= 0 || static_cast<int>(chosen.size()) < top_n)) {
        double best = current;
        int best_k = -1;
        for (std::size_t k = 0; k < remaining.size(); ++k) {
          mask[remaining[k] + 1] = 1;
          double p = rc_distribution(model.params, h, mask, inst)(target.cls);
          mask[remaining[k] + 1] = 0;
          if (p > best) best = p, best_k = static_cast<int>(k);
        }
        if (best_k < 0) break;
        mask[remaining[best_k] + 1] = 1;
        chosen.push_back(remaining[best_k]);
        remaining.erase(remaining.begin() + best_k);
        current = best;
      }
      std::sort(chosen.begin(), chosen.end());
      return chosen;
    }
  }
  return {};
}

}  // namespace rxf
