#pragma once

// Relation extraction metrics, rationale overlap and plausibility.

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "rxf/corpus.hpp"
#include "rxf/error.hpp"

namespace rxf {

struct EvalReport {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  long tp = 0;
  long fp = 0;
  long fn = 0;
  long instances = 0;
};

inline double harmonic_f1(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

/// Micro P/R/F1 with NO_RELATION as the negative class.
inline EvalReport rc_micro(const std::map<std::string, std::string>& preds,
                           const std::map<std::string, std::string>& golds) {
  if (preds.size() != golds.size()) throw ValidationError("prediction and gold id sets differ in size");
  EvalReport r;
  for (const auto& [id, gold] : golds) {
    auto it = preds.find(id);
    if (it == preds.end()) throw ValidationError("no prediction for instance '" + id + "'");
    const auto& pred = it->second;
    ++r.instances;
    bool pred_pos = pred != kNoRelation;
    bool gold_pos = gold != kNoRelation;
    if (pred_pos && pred == gold) ++r.tp;
    else {
      if (pred_pos) ++r.fp;
      if (gold_pos) ++r.fn;
    }
  }
  r.precision = r.tp + r.fp > 0 ? static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fp) : 0.0;
  r.recall = r.tp + r.fn > 0 ? static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fn) : 0.0;
  r.f1 = harmonic_f1(r.precision, r.recall);
  return r;
}

using TokenSets = std::map<std::string, std::vector<int>>;

struct OverlapScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  long tp = 0, fp = 0, fn = 0;
};

/// P/R/F1 of one predicted token set against one gold set (gold non-empty).
inline OverlapScore set_overlap(const std::vector<int>& pred, const std::vector<int>& gold) {
  std::set<int> p(pred.begin(), pred.end()), g(gold.begin(), gold.end());
  OverlapScore s;
  for (int t : p) s.tp += g.count(t);
  s.fp = static_cast<long>(p.size()) - s.tp;
  s.fn = static_cast<long>(g.size()) - s.tp;
  s.precision = p.empty() ? 0.0 : static_cast<double>(s.tp) / static_cast<double>(p.size());
  s.recall = g.empty() ? 0.0 : static_cast<double>(s.tp) / static_cast<double>(g.size());
  s.f1 = harmonic_f1(s.precision, s.recall);
  return s;
}

namespace detail {

inline void accumulate(EvalReport& r, const OverlapScore& s) {
  r.precision += s.precision;
  r.recall += s.recall;
  r.f1 += s.f1;
  r.tp += s.tp;
  r.fp += s.fp;
  r.fn += s.fn;
  ++r.instances;
}

inline void finish_macro(EvalReport& r) {
  if (r.instances == 0) return;
  const double n = static_cast<double>(r.instances);
  r.precision /= n;
  r.recall /= n;
  r.f1 /= n;
}

}  // namespace detail

/// Per-instance overlap macro-averaged over instances with a non-empty gold set.
/// Instances absent from `pred` count as empty predictions.
inline EvalReport ec_overlap(const TokenSets& pred, const TokenSets& gold) {
  EvalReport r;
  static const std::vector<int> empty;
  for (const auto& [id, g] : gold) {
    if (g.empty()) continue;
    auto it = pred.find(id);
    detail::accumulate(r, set_overlap(it == pred.end() ? empty : it->second, g));
  }
  detail::finish_macro(r);
  return r;
}

struct HumanAnnotation {
  std::string id;
  std::vector<int> annotator_a;
  std::vector<int> annotator_b;
};

using HumanAnnotationFile = std::vector<HumanAnnotation>;

inline HumanAnnotationFile load_human_annotations(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open annotation file '" + path + "'");
  HumanAnnotationFile out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw LoadError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    HumanAnnotation h;
    if (!rec.contains("id")) throw LoadError(path + ":" + std::to_string(line_no) + ": missing id");
    h.id = rec["id"].get<std::string>();
    if (!rec.contains("annotator_a") || !rec.contains("annotator_b"))
      throw LoadError("annotation '" + h.id + "': both annotators are required");
    h.annotator_a = rec["annotator_a"].get<std::vector<int>>();
    h.annotator_b = rec["annotator_b"].get<std::vector<int>>();
    out.push_back(std::move(h));
  }
  return out;
}

inline void write_human_annotations(const HumanAnnotationFile& file, std::ostream& out) {
  for (const auto& h : file) {
    nlohmann::ordered_json rec;
    rec["id"] = h.id;
    rec["annotator_a"] = h.annotator_a;
    rec["annotator_b"] = h.annotator_b;
    out << rec.dump() << '\n';
  }
}

/// Per instance, the better of the two annotator overlaps (by F1, first
/// annotator on ties), macro-averaged.
inline EvalReport plausibility(const TokenSets& pred, const HumanAnnotationFile& humans) {
  EvalReport r;
  static const std::vector<int> empty;
  for (const auto& h : humans) {
    auto it = pred.find(h.id);
    const auto& p = it == pred.end() ? empty : it->second;
    std::optional<OverlapScore> best;
    for (const auto* gold : {&h.annotator_a, &h.annotator_b}) {
      if (gold->empty()) continue;
      auto s = set_overlap(p, *gold);
      if (!best || s.f1 > best->f1) best = s;
    }
    if (best) detail::accumulate(r, *best);
  }
  detail::finish_macro(r);
  return r;
}

// ---------------------------------------------------------------------------
// Report output

inline nlohmann::ordered_json report_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["precision"] = r.precision;
  j["recall"] = r.recall;
  j["f1"] = r.f1;
  j["tp"] = r.tp;
  j["fp"] = r.fp;
  j["fn"] = r.fn;
  j["instances"] = r.instances;
  return j;
}

/// Aligned-column table, one row per named report.
inline std::string report_table(const std::vector<std::pair<std::string, EvalReport>>& rows) {
  std::size_t width = 4;
  for (const auto& [name, _] : rows) width = std::max(width, name.size());
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-*s %9s %9s %9s %7s %7s %7s %9s\n", static_cast<int>(width), "name", "precision",
                "recall", "f1", "tp", "fp", "fn", "instances");
  out += buf;
  for (const auto& [name, r] : rows) {
    std::snprintf(buf, sizeof buf, "%-*s %9.4f %9.4f %9.4f %7ld %7ld %7ld %9ld\n", static_cast<int>(width),
                  name.c_str(), r.precision, r.recall, r.f1, r.tp, r.fp, r.fn, r.instances);
    out += buf;
  }
  return out;
}

}  // namespace rxf
