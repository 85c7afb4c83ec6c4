#pragma once

// Turning explained instances into syntactic rules, and merging rule sets.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rxf/dep_path.hpp"
#include "rxf/explanation.hpp"
#include "rxf/relation_model.hpp"
#include "rxf/rules.hpp"
#include "rxf/trainer.hpp"

namespace rxf {

/// Longest contiguous run of marked original tokens; among equally long runs the
/// one closest to the subject span (then the leftmost). Empty when nothing is marked.
inline std::vector<int> trigger_run(const RelationInstance& inst, const ExplanationLabels& expl) {
  auto marked = expl.tokens();
  std::vector<int> best;
  int best_dist = 0;
  auto dist_to_subj = [&](int a, int b) {
    if (b < inst.subj.first) return inst.subj.first - b;
    if (a > inst.subj.last) return a - inst.subj.last;
    return 0;
  };
  for (std::size_t i = 0; i < marked.size();) {
    std::size_t j = i + 1;
    while (j < marked.size() && marked[j] == marked[j - 1] + 1) ++j;
    std::vector<int> run(marked.begin() + static_cast<long>(i), marked.begin() + static_cast<long>(j));
    int d = dist_to_subj(run.front(), run.back());
    if (run.size() > best.size() || (run.size() == best.size() && d < best_dist)) {
      best = std::move(run);
      best_dist = d;
    }
    i = j;
  }
  return best;
}

/// A syntactic rule whose trigger is the words of the longest marked run and
/// whose argument paths are the shortest dependency paths from the run's head
/// to each entity span. nullopt when the explanation marks nothing.
inline std::optional<Rule> generate_rule(const RelationInstance& inst, const ExplanationLabels& expl,
                                         const std::string& label, Provenance provenance, const std::string& id) {
  auto run = trigger_run(inst, expl);
  if (run.empty()) return std::nullopt;
  std::vector<std::string> words;
  for (int t : run) words.push_back(inst.tokens[t].form);
  auto depth = depths(inst);
  int anchor = detail::run_head(depth, run.front(), static_cast<int>(run.size()));

  SyntacticRule s;
  s.trigger = {TriggerField::Word, {words}};
  s.subject = {inst.subj_type, shortest_dep_path(inst, {anchor}, span_indices(inst.subj)).path};
  s.object = {inst.obj_type, shortest_dep_path(inst, {anchor}, span_indices(inst.obj)).path};
  return Rule{id, label, provenance, s};
}

enum class RuleSourceKind { TrainGold, TestPredicted };

struct GenConfig {
  RuleSourceKind source = RuleSourceKind::TrainGold;
  bool skip_if_manual_match = true;
  bool dedupe = true;
};

/// Label and explanation to turn into a rule, per instance id.
struct RuleSource {
  std::string label;
  ExplanationLabels explanation;
};

/// One rule per sourced instance with a positive label. Instances matched by a
/// manual rule are skipped, and rules repeating earlier content are dropped,
/// when the config asks for it.
inline RuleSet generate_rules(const std::vector<RelationInstance>& instances,
                              const std::map<std::string, RuleSource>& sources, const RuleSet& manual,
                              const GenConfig& cfg) {
  const bool train = cfg.source == RuleSourceKind::TrainGold;
  const Provenance prov = train ? Provenance::GenTrain : Provenance::GenTest;
  const std::string prefix = train ? "gen_train_" : "gen_test_";
  RuleSet out;
  for (const auto& inst : instances) {
    auto it = sources.find(inst.id);
    if (it == sources.end() || it->second.label == kNoRelation) continue;
    if (cfg.skip_if_manual_match) {
      bool covered = false;
      for (const auto& r : manual.rules) covered = covered || match_rule(r, inst).has_value();
      if (covered) continue;
    }
    auto rule = generate_rule(inst, it->second.explanation, it->second.label, prov,
                              prefix + std::to_string(out.size() + 1));
    if (!rule) continue;
    if (cfg.dedupe) {
      bool dup = false;
      for (const auto& r : out.rules) dup = dup || r.same_content(*rule);
      if (dup) continue;
    }
    out.rules.push_back(std::move(*rule));
  }
  return out;
}

/// Gold-label sources: rule annotations where present, otherwise the latent
/// explanation that best recovers the gold label under the model.
inline std::map<std::string, RuleSource> gold_sources(const RelationModel& model,
                                                      const std::vector<RelationInstance>& instances,
                                                      const std::map<std::string, ExplanationLabels>& rule_labels,
                                                      const TrainConfig& cfg) {
  std::map<std::string, RuleSource> out;
  for (const auto& inst : instances) {
    if (!inst.is_positive()) continue;
    if (auto it = rule_labels.find(inst.id); it != rule_labels.end()) {
      out[inst.id] = {inst.relation, it->second};
      continue;
    }
    int cls = model.class_index(inst.relation);
    if (cls < 0) continue;
    if (!model.config.use_ec) continue;
    auto enc = model.encode(inst);
    auto scores = ec_scores(model.params, enc.h, inst);
    auto cands = generate_candidates(scores, cfg.t_low, cfg.t_up, cfg.candidate_cap);
    auto sel = select_candidate(cands, inst, cls, model.params, enc.h);
    out[inst.id] = {inst.relation, cands[sel.index]};
  }
  return out;
}

/// Predicted-label sources: the model's own label and rationale.
inline std::map<std::string, RuleSource> predicted_sources(const RelationModel& model,
                                                           const std::vector<RelationInstance>& instances) {
  std::map<std::string, RuleSource> out;
  for (const auto& inst : instances) {
    auto p = model.predict(inst);
    if (p.label != kNoRelation) out[inst.id] = {p.label, p.rationale};
  }
  return out;
}

/// Concatenation in argument order, dropping rules whose content repeats an
/// earlier one. Colliding ids get a numeric suffix.
inline RuleSet merge_rulesets(const std::vector<RuleSet>& sets) {
  RuleSet out;
  std::set<std::string> ids;
  for (const auto& set : sets) {
    for (const auto& r : set.rules) {
      bool dup = false;
      for (const auto& o : out.rules) dup = dup || o.same_content(r);
      if (dup) continue;
      Rule copy = r;
      for (int k = 2; ids.count(copy.id); ++k) copy.id = r.id + "_" + std::to_string(k);
      ids.insert(copy.id);
      out.rules.push_back(std::move(copy));
    }
  }
  return out;
}

inline RuleSet dedupe(const RuleSet& set) { return merge_rulesets({set}); }

/// Rule-only predictions for a partition.
inline std::map<std::string, std::string> rule_predictions(const RuleSet& rules,
                                                           const std::vector<RelationInstance>& instances) {
  std::map<std::string, std::string> out;
  for (const auto& inst : instances) out[inst.id] = predict_with_rules(rules, inst);
  return out;
}

}  // namespace rxf
