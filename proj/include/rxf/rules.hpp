#pragma once

// Surface (token sequence) and syntactic (trigger + dependency path) extraction
// rules, the rule file format, and rule matching.
//
// Rule file: records separated by blank lines, one "key: value" per line.
//
//   id: born_in
//   kind: surface
//   label: per:city_of_birth
//   pattern: SUBJ-PERSON was born in * OBJ-CITY
//
//   id: children_poss
//   kind: syntactic
//   label: per:children
//   trigger: word=daughter|son
//   subject: SUBJ_PERSON = >nmod:poss
//   object: OBJ_PERSON = >appos
//
// Path steps: "<rel" climbs to the head, ">rel" descends to a dependent, a bare
// "rel" repeats the previous direction (down when first), a trailing '?' makes
// the step optional. Trigger alternatives may
// be multi-word sequences ("born in"); Odin-style "[word=/a|b/]" is accepted.

#include <algorithm>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "rxf/corpus.hpp"
#include "rxf/dep_path.hpp"
#include "rxf/error.hpp"
#include "rxf/explanation.hpp"
#include "rxf/masking.hpp"
#include "rxf/strings.hpp"

namespace rxf {

enum class Provenance { Manual, GenTrain, GenTest };

inline const char* to_string(Provenance p) {
  switch (p) {
    case Provenance::Manual: return "manual";
    case Provenance::GenTrain: return "gen_train";
    case Provenance::GenTest: return "gen_test";
  }
  return "manual";
}

struct SurfaceElement {
  enum class Kind { Literal, Subj, Obj, Gap };
  Kind kind = Kind::Literal;
  std::string text;  // word for Literal, entity type for Subj/Obj
  bool operator==(const SurfaceElement&) const = default;
  auto operator<=>(const SurfaceElement&) const = default;
};

struct SurfaceRule {
  std::vector<SurfaceElement> pattern;
  bool operator==(const SurfaceRule&) const = default;
};

enum class TriggerField { Word, Lemma };

struct TriggerConstraint {
  TriggerField field = TriggerField::Word;
  std::vector<std::vector<std::string>> alternatives;  // each a token sequence
  bool operator==(const TriggerConstraint&) const = default;
};

struct ArgumentPattern {
  std::string entity_type;
  DepPath path;
  bool operator==(const ArgumentPattern&) const = default;
};

struct SyntacticRule {
  TriggerConstraint trigger;
  ArgumentPattern subject;
  ArgumentPattern object;
  bool operator==(const SyntacticRule&) const = default;
};

struct Rule {
  std::string id;
  std::string label;
  Provenance provenance = Provenance::Manual;
  std::variant<SurfaceRule, SyntacticRule> body;

  bool is_surface() const { return std::holds_alternative<SurfaceRule>(body); }
  const SurfaceRule& surface() const { return std::get<SurfaceRule>(body); }
  const SyntacticRule& syntactic() const { return std::get<SyntacticRule>(body); }

  /// Same extraction behaviour: label and body agree (ids and provenance ignored).
  bool same_content(const Rule& o) const { return label == o.label && body == o.body; }
};

struct RuleSet {
  std::vector<Rule> rules;

  std::size_t size() const { return rules.size(); }
  bool empty() const { return rules.empty(); }
};

struct RuleMatch {
  std::string rule_id;
  std::string instance_id;
  std::vector<int> trigger_tokens;  // original token indices, sorted
  std::string label;
};

// ---------------------------------------------------------------------------
// Validation

inline void validate_rule(const Rule& r, int line) {
  if (r.id.empty()) throw ValidationError("rule near line " + std::to_string(line) + " has no id");
  auto fail = [&](const std::string& why) { throw ValidationError("rule '" + r.id + "': " + why); };
  if (r.label.empty()) fail("missing label");
  if (r.label == kNoRelation) fail("rules cannot extract " + kNoRelation);
  if (r.is_surface()) {
    const auto& p = r.surface().pattern;
    int subj = 0, obj = 0, lit = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      switch (p[i].kind) {
        case SurfaceElement::Kind::Subj: ++subj; break;
        case SurfaceElement::Kind::Obj: ++obj; break;
        case SurfaceElement::Kind::Literal: ++lit; break;
        case SurfaceElement::Kind::Gap:
          if (i > 0 && p[i - 1].kind == SurfaceElement::Kind::Gap) fail("adjacent wildcards");
          break;
      }
    }
    if (subj == 0 && obj == 0) fail("pattern has no arguments");
    if (subj != 1 || obj != 1) fail("pattern needs exactly one SUBJ and one OBJ placeholder");
    if (lit == 0) fail("pattern needs at least one literal");
  } else {
    const auto& s = r.syntactic();
    if (s.trigger.alternatives.empty()) fail("empty trigger alternation");
    for (const auto& alt : s.trigger.alternatives)
      if (alt.empty()) fail("empty trigger alternative");
    for (const auto* arg : {&s.subject, &s.object}) {
      if (arg->entity_type.empty()) fail("argument without entity type");
      for (const auto& step : arg->path)
        if (step.deprel.empty()) fail("path step without a dependency label");
    }
  }
}

// ---------------------------------------------------------------------------
// Parsing

namespace detail {

inline std::string strip_entity_prefix(std::string_view t, std::string_view prefix) {
  if (starts_with(t, prefix)) t.remove_prefix(prefix.size());
  return std::string(t);
}

inline std::vector<SurfaceElement> parse_surface_pattern(std::string_view text, int line) {
  std::vector<SurfaceElement> out;
  for (const auto& tok : split_ws(text)) {
    std::string t = tok;
    if (t.size() > 2 && t.front() == '[' && t.back() == ']') t = t.substr(1, t.size() - 2);
    if (t == "*") {
      out.push_back({SurfaceElement::Kind::Gap, ""});
    } else if (starts_with(t, "SUBJ-")) {
      if (t.size() == 5) throw RuleSyntaxError("SUBJ placeholder without type", line);
      out.push_back({SurfaceElement::Kind::Subj, t.substr(5)});
    } else if (starts_with(t, "OBJ-")) {
      if (t.size() == 4) throw RuleSyntaxError("OBJ placeholder without type", line);
      out.push_back({SurfaceElement::Kind::Obj, t.substr(4)});
    } else {
      out.push_back({SurfaceElement::Kind::Literal, t});
    }
  }
  return out;
}

inline TriggerConstraint parse_trigger(std::string_view text, int line) {
  std::string_view t = trim(text);
  if (t.size() >= 2 && t.front() == '[' && t.back() == ']') t = trim(t.substr(1, t.size() - 2));
  auto eq = t.find('=');
  if (eq == std::string_view::npos) throw RuleSyntaxError("trigger must be field=alternatives", line);
  std::string field{trim(t.substr(0, eq))};
  std::string_view alts = trim(t.substr(eq + 1));
  if (alts.size() >= 2 && alts.front() == '/' && alts.back() == '/') alts = alts.substr(1, alts.size() - 2);
  TriggerConstraint c;
  if (field == "word") c.field = TriggerField::Word;
  else if (field == "lemma") c.field = TriggerField::Lemma;
  else throw RuleSyntaxError("unknown trigger field '" + field + "'", line);
  for (const auto& alt : split(alts, '|')) {
    auto words = split_ws(alt);
    if (words.empty()) throw RuleSyntaxError("empty trigger alternative", line);
    c.alternatives.push_back(std::move(words));
  }
  return c;
}

inline DepPath parse_path(std::string_view text, int line) {
  // A step without '<' or '>' keeps the direction of the step before it; a
  // leading bare step goes down.
  DepPath path;
  Direction dir = Direction::Down;
  for (auto tok : split_ws(text)) {
    PathStep step;
    step.dir = dir;
    if (tok.front() == '<') {
      step.dir = Direction::Up;
      tok.erase(0, 1);
    } else if (tok.front() == '>') {
      step.dir = Direction::Down;
      tok.erase(0, 1);
    }
    if (!tok.empty() && tok.back() == '?') {
      step.optional = true;
      tok.pop_back();
    }
    if (tok.empty()) throw RuleSyntaxError("path step without a dependency label", line);
    step.deprel = tok;
    dir = step.dir;
    path.push_back(std::move(step));
  }
  return path;
}

inline ArgumentPattern parse_argument(std::string_view text, std::string_view prefix, int line) {
  auto eq = text.find('=');
  if (eq == std::string_view::npos) throw RuleSyntaxError("argument must be 'TYPE = path'", line);
  ArgumentPattern arg;
  arg.entity_type = strip_entity_prefix(trim(text.substr(0, eq)), prefix);
  if (arg.entity_type.empty()) throw RuleSyntaxError("argument without entity type", line);
  arg.path = parse_path(text.substr(eq + 1), line);
  return arg;
}

inline std::string trigger_to_string(const TriggerConstraint& c) {
  std::string out = c.field == TriggerField::Word ? "word=" : "lemma=";
  for (std::size_t i = 0; i < c.alternatives.size(); ++i) {
    if (i) out += '|';
    for (std::size_t j = 0; j < c.alternatives[i].size(); ++j) {
      if (j) out += ' ';
      out += c.alternatives[i][j];
    }
  }
  return out;
}

}  // namespace detail

inline RuleSet parse_rules_text(std::string_view text) {
  RuleSet set;
  std::set<std::string> ids;
  std::map<std::string, std::pair<std::string, int>> fields;
  int record_line = 0;

  auto flush = [&]() {
    if (fields.empty()) return;
    auto get = [&](const char* key) -> std::optional<std::pair<std::string, int>> {
      auto it = fields.find(key);
      if (it == fields.end()) return std::nullopt;
      return it->second;
    };
    Rule r;
    auto id = get("id");
    if (!id) throw RuleSyntaxError("rule without 'id'", record_line);
    r.id = id->first;
    auto label = get("label");
    if (!label) throw RuleSyntaxError("rule '" + r.id + "' without 'label'", record_line);
    r.label = label->first;
    if (auto prov = get("provenance")) {
      if (prov->first == "manual") r.provenance = Provenance::Manual;
      else if (prov->first == "gen_train") r.provenance = Provenance::GenTrain;
      else if (prov->first == "gen_test") r.provenance = Provenance::GenTest;
      else throw RuleSyntaxError("unknown provenance '" + prov->first + "'", prov->second);
    }
    auto kind = get("kind");
    if (!kind) throw RuleSyntaxError("rule '" + r.id + "' without 'kind'", record_line);
    if (kind->first == "surface") {
      if (get("trigger") || get("subject") || get("object"))
        throw RuleSyntaxError("surface rule '" + r.id + "' with syntactic fields", record_line);
      auto pattern = get("pattern");
      if (!pattern) throw ValidationError("rule '" + r.id + "': surface rule without pattern");
      r.body = SurfaceRule{detail::parse_surface_pattern(pattern->first, pattern->second)};
    } else if (kind->first == "syntactic") {
      if (get("pattern"))
        throw RuleSyntaxError("syntactic rule '" + r.id + "' with a surface pattern", record_line);
      auto trig = get("trigger");
      auto subj = get("subject");
      auto obj = get("object");
      if (!subj || !obj) throw ValidationError("rule '" + r.id + "': syntactic rule needs subject and object arguments");
      if (!trig) throw ValidationError("rule '" + r.id + "': syntactic rule without trigger");
      SyntacticRule s;
      s.trigger = detail::parse_trigger(trig->first, trig->second);
      s.subject = detail::parse_argument(subj->first, "SUBJ_", subj->second);
      s.object = detail::parse_argument(obj->first, "OBJ_", obj->second);
      r.body = std::move(s);
    } else {
      throw RuleSyntaxError("unknown rule kind '" + kind->first + "'", kind->second);
    }
    validate_rule(r, record_line);
    if (!ids.insert(r.id).second) throw ValidationError("duplicate rule id '" + r.id + "'");
    set.rules.push_back(std::move(r));
    fields.clear();
  };

  static const std::set<std::string> known{"id", "kind", "label", "provenance", "pattern",
                                           "trigger", "subject", "object"};
  int line_no = 0;
  for (const auto& raw : split_lines(text)) {
    ++line_no;
    std::string_view line = trim(raw);
    if (line.empty()) {
      flush();
      continue;
    }
    if (line.front() == '#') continue;
    auto colon = line.find(':');
    if (colon == std::string_view::npos) throw RuleSyntaxError("expected 'key: value'", line_no);
    std::string key{trim(line.substr(0, colon))};
    std::string value{trim(line.substr(colon + 1))};
    if (!known.count(key)) throw RuleSyntaxError("unknown key '" + key + "'", line_no);
    if (fields.empty()) record_line = line_no;
    if (fields.count(key)) throw RuleSyntaxError("duplicate key '" + key + "'", line_no);
    if (value.empty()) throw RuleSyntaxError("empty value for '" + key + "'", line_no);
    fields[key] = {value, line_no};
  }
  flush();
  return set;
}

inline RuleSet parse_rules(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open rule file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_rules_text(ss.str());
}

inline std::string format_rule(const Rule& r) {
  std::string out = "id: " + r.id + "\n";
  out += std::string("kind: ") + (r.is_surface() ? "surface" : "syntactic") + "\n";
  out += "label: " + r.label + "\n";
  out += std::string("provenance: ") + to_string(r.provenance) + "\n";
  if (r.is_surface()) {
    std::string pat;
    for (const auto& e : r.surface().pattern) {
      if (!pat.empty()) pat += ' ';
      switch (e.kind) {
        case SurfaceElement::Kind::Literal: pat += e.text; break;
        case SurfaceElement::Kind::Subj: pat += "SUBJ-" + e.text; break;
        case SurfaceElement::Kind::Obj: pat += "OBJ-" + e.text; break;
        case SurfaceElement::Kind::Gap: pat += "*"; break;
      }
    }
    out += "pattern: " + pat + "\n";
  } else {
    const auto& s = r.syntactic();
    out += "trigger: " + detail::trigger_to_string(s.trigger) + "\n";
    out += "subject: SUBJ_" + s.subject.entity_type + " = " + to_string(s.subject.path) + "\n";
    out += "object: OBJ_" + s.object.entity_type + " = " + to_string(s.object.path) + "\n";
  }
  return out;
}

inline std::string format_rules(const RuleSet& set) {
  std::string out;
  for (std::size_t i = 0; i < set.rules.size(); ++i) {
    if (i) out += '\n';
    out += format_rule(set.rules[i]);
  }
  return out;
}

inline void write_rules(const RuleSet& set, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw LoadError("cannot write rule file '" + path + "'");
  out << format_rules(set);
}

// ---------------------------------------------------------------------------
// Matching

namespace detail {

// Leftmost start, then lexicographically shortest gap lengths.
inline bool match_surface_from(const std::vector<SurfaceElement>& pat, std::size_t k,
                               const RelationInstance& inst, int pos, std::vector<int>& literals) {
  if (k == pat.size()) return true;
  const auto& e = pat[k];
  switch (e.kind) {
    case SurfaceElement::Kind::Gap:
      for (int len = 0; pos + len <= inst.size(); ++len) {
        auto saved = literals.size();
        if (match_surface_from(pat, k + 1, inst, pos + len, literals)) return true;
        literals.resize(saved);
      }
      return false;
    case SurfaceElement::Kind::Subj:
      if (pos != inst.subj.first || !iequals(e.text, inst.subj_type)) return false;
      return match_surface_from(pat, k + 1, inst, inst.subj.last + 1, literals);
    case SurfaceElement::Kind::Obj:
      if (pos != inst.obj.first || !iequals(e.text, inst.obj_type)) return false;
      return match_surface_from(pat, k + 1, inst, inst.obj.last + 1, literals);
    case SurfaceElement::Kind::Literal:
      if (pos >= inst.size() || inst.in_entity(pos) || inst.tokens[pos].form != e.text) return false;
      literals.push_back(pos);
      if (match_surface_from(pat, k + 1, inst, pos + 1, literals)) return true;
      literals.pop_back();
      return false;
  }
  return false;
}

inline std::vector<std::vector<int>> children_of(const RelationInstance& inst) {
  std::vector<std::vector<int>> kids(inst.size());
  for (int i = 0; i < inst.size(); ++i)
    if (inst.tokens[i].head != kRoot) kids[inst.tokens[i].head].push_back(i);
  return kids;
}

/// Nodes reachable from `start` by following `path`; optional steps may be skipped.
inline std::set<int> follow_path(const RelationInstance& inst, const std::vector<std::vector<int>>& kids,
                                 int start, const DepPath& path) {
  std::set<int> cur{start};
  for (const auto& step : path) {
    std::set<int> next;
    if (step.optional) next = cur;
    for (int node : cur) {
      if (step.dir == Direction::Up) {
        const auto& t = inst.tokens[node];
        if (t.head != kRoot && t.deprel == step.deprel) next.insert(t.head);
      } else {
        for (int c : kids[node])
          if (inst.tokens[c].deprel == step.deprel) next.insert(c);
      }
    }
    cur = std::move(next);
    if (cur.empty()) break;
  }
  return cur;
}

inline bool reaches_span(const std::set<int>& nodes, const Span& span) {
  auto it = nodes.lower_bound(span.first);
  return it != nodes.end() && *it <= span.last;
}

/// Shallowest token of a run; ties go to the leftmost.
inline int run_head(const std::vector<int>& depth, int first, int len) {
  int best = first;
  for (int i = first + 1; i < first + len; ++i)
    if (depth[i] < depth[best]) best = i;
  return best;
}

inline bool trigger_token_matches(const Token& t, TriggerField field, const std::string& want) {
  return field == TriggerField::Word ? t.form == want : iequals(t.lemma, want);
}

}  // namespace detail

inline std::optional<RuleMatch> match_rule(const Rule& rule, const RelationInstance& inst) {
  if (rule.is_surface()) {
    const auto& pat = rule.surface().pattern;
    for (int start = 0; start < inst.size(); ++start) {
      std::vector<int> literals;
      if (detail::match_surface_from(pat, 0, inst, start, literals))
        return RuleMatch{rule.id, inst.id, literals, rule.label};
    }
    return std::nullopt;
  }

  const auto& syn = rule.syntactic();
  if (!iequals(syn.subject.entity_type, inst.subj_type) || !iequals(syn.object.entity_type, inst.obj_type))
    return std::nullopt;
  auto depth = depths(inst);
  auto kids = detail::children_of(inst);
  for (int start = 0; start < inst.size(); ++start) {
    for (const auto& alt : syn.trigger.alternatives) {
      const int len = static_cast<int>(alt.size());
      if (start + len > inst.size()) continue;
      bool ok = true;
      for (int j = 0; j < len && ok; ++j)
        ok = !inst.in_entity(start + j) &&
             detail::trigger_token_matches(inst.tokens[start + j], syn.trigger.field, alt[j]);
      if (!ok) continue;
      int anchor = detail::run_head(depth, start, len);
      if (!detail::reaches_span(detail::follow_path(inst, kids, anchor, syn.subject.path), inst.subj)) continue;
      if (!detail::reaches_span(detail::follow_path(inst, kids, anchor, syn.object.path), inst.obj)) continue;
      std::vector<int> trig;
      for (int j = 0; j < len; ++j) trig.push_back(start + j);
      return RuleMatch{rule.id, inst.id, trig, rule.label};
    }
  }
  return std::nullopt;
}

/// Label of the earliest rule (in set order) matching the instance, or kNoRelation.
inline std::string predict_with_rules(const RuleSet& rules, const RelationInstance& inst,
                                      std::optional<RuleMatch>* winning = nullptr) {
  for (const auto& r : rules.rules) {
    if (auto m = match_rule(r, inst)) {
      if (winning) *winning = m;
      return r.label;
    }
  }
  if (winning) winning->reset();
  return kNoRelation;
}

/// Rule-derived explanation labels for positive instances with at least one
/// matching rule whose label equals the gold label. Bits are the union of the
/// trigger tokens of every such match.
inline std::map<std::string, ExplanationLabels> annotate_explanations(
    const RuleSet& rules, const std::vector<RelationInstance>& instances) {
  std::map<std::string, ExplanationLabels> out;
  for (const auto& inst : instances) {
    if (!inst.is_positive()) continue;
    std::optional<ExplanationLabels> labels;
    for (const auto& r : rules.rules) {
      if (r.label != inst.relation) continue;
      auto m = match_rule(r, inst);
      if (!m) continue;
      if (!labels) labels = ExplanationLabels::zeros(inst, ExplanationSource::Rule);
      for (int t : m->trigger_tokens) labels->bits[t + 1] = 1;
    }
    if (labels) out.emplace(inst.id, std::move(*labels));
  }
  return out;
}

inline std::map<std::string, ExplanationLabels> annotate_explanations(const RuleSet& rules,
                                                                      const Corpus& corpus) {
  auto out = annotate_explanations(rules, corpus.train);
  out.merge(annotate_explanations(rules, corpus.dev));
  out.merge(annotate_explanations(rules, corpus.test));
  return out;
}

}  // namespace rxf
