#pragma once

// Template-based synthetic corpora with hand-built dependency trees, a seeded
// manual rule set covering a chosen fraction of the positives, and two-annotator
// rationale annotations for the test partition.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "rxf/corpus.hpp"
#include "rxf/eval.hpp"
#include "rxf/keyed_config.hpp"
#include "rxf/rng.hpp"
#include "rxf/rules.hpp"

namespace rxf {

enum class Frame {
  Svo,      // S [adv] V O
  Svpo,     // S [adv] V P O
  Passive,  // S [adv] was V P O
  Appos,    // S , the N P O , V2
  Poss,     // S 's N , O , V2
  Copula,   // S is the N P O
  Coord,    // S and O V2
};

struct Lexeme {
  Frame frame;
  std::string head;        // verb or noun form
  std::string head_lemma;  // empty: same as head
  std::string prep;        // empty when the frame has none
  bool covered = false;    // a seeded manual rule extracts this lexeme
};

struct RelationTemplate {
  std::string label;
  std::string subj_type;
  std::string obj_type;
  std::vector<Lexeme> lexemes;
};

inline const std::string kPer = "PERSON";
inline const std::string kOrg = "ORGANIZATION";
inline const std::string kCity = "CITY";

inline const std::vector<RelationTemplate>& relation_bank() {
  using F = Frame;
  static const std::vector<RelationTemplate> bank{
      {"per:city_of_birth", kPer, kCity,
       {{F::Passive, "born", "bear", "in", true},
        {F::Appos, "native", "", "of", true},
        {F::Svpo, "hails", "hail", "from"},
        {F::Copula, "native", "", "of"},
        {F::Svpo, "comes", "come", "from"}}},
      {"per:cities_of_residence", kPer, kCity,
       {{F::Svpo, "lives", "live", "in", true},
        {F::Appos, "resident", "", "of", true},
        {F::Svpo, "resides", "reside", "in"},
        {F::Svpo, "settled", "settle", "in"},
        {F::Copula, "resident", "", "of"}}},
      {"per:city_of_death", kPer, kCity,
       {{F::Svpo, "died", "die", "in", true},
        {F::Passive, "killed", "kill", "in", true},
        {F::Svpo, "perished", "perish", "in"},
        {F::Passive, "buried", "bury", "in"},
        {F::Svpo, "drowned", "drown", "in"}}},
      {"per:children", kPer, kPer,
       {{F::Poss, "daughter", "", "", true},
        {F::Poss, "son", "", "", true},
        {F::Copula, "father", "", "of"},
        {F::Copula, "mother", "", "of"},
        {F::Appos, "parent", "", "of"}}},
      {"per:spouse", kPer, kPer,
       {{F::Poss, "wife", "", "", true},
        {F::Svo, "married", "marry", "", true},
        {F::Poss, "husband", "", ""},
        {F::Copula, "wife", "", "of"},
        {F::Appos, "spouse", "", "of"},
        {F::Svo, "wed", "wed", ""}}},
      {"per:siblings", kPer, kPer,
       {{F::Poss, "brother", "", "", true},
        {F::Copula, "sister", "", "of", true},
        {F::Poss, "sister", "", ""},
        {F::Appos, "brother", "", "of"},
        {F::Copula, "sibling", "", "of"}}},
      {"per:employee_of", kPer, kOrg,
       {{F::Svpo, "works", "work", "for", true},
        {F::Appos, "employee", "", "of", true},
        {F::Svo, "joined", "join", ""},
        {F::Svpo, "works", "work", "at"},
        {F::Appos, "engineer", "", "at"},
        {F::Copula, "spokesman", "", "for"}}},
      {"per:schools_attended", kPer, kOrg,
       {{F::Svo, "attended", "attend", "", true},
        {F::Svpo, "graduated", "graduate", "from", true},
        {F::Svpo, "studied", "study", "at"},
        {F::Appos, "alumnus", "", "of"},
        {F::Passive, "educated", "educate", "at"},
        {F::Copula, "student", "", "at"}}},
      {"org:founded_by", kOrg, kPer,
       {{F::Passive, "founded", "found", "by", true},
        {F::Passive, "established", "establish", "by", true},
        {F::Passive, "created", "create", "by"},
        {F::Passive, "started", "start", "by"},
        {F::Passive, "launched", "launch", "by"}}},
      {"org:city_of_headquarters", kOrg, kCity,
       {{F::Passive, "based", "base", "in", true},
        {F::Passive, "headquartered", "headquarter", "in", true},
        {F::Passive, "located", "locate", "in"},
        {F::Svpo, "operates", "operate", "from"}}},
  };
  return bank;
}

/// NO_RELATION templates per (subject type, object type).
inline std::vector<Lexeme> distractor_lexemes(const std::string& subj, const std::string& obj) {
  using F = Frame;
  if (subj == kPer && obj == kCity)
    return {{F::Svo, "visited", "visit", ""}, {F::Svpo, "traveled", "travel", "to"},
            {F::Svpo, "flew", "fly", "to"},    {F::Svo, "toured", "tour", ""},
            {F::Appos, "visitor", "", "to"},   {F::Coord, "", "", ""}};
  if (subj == kPer && obj == kPer)
    return {{F::Svo, "met", "meet", ""},        {F::Svo, "praised", "praise", ""},
            {F::Svpo, "argued", "argue", "with"}, {F::Poss, "friend", "", ""},
            {F::Copula, "rival", "", "of"},       {F::Coord, "", "", ""}};
  if (subj == kPer && obj == kOrg)
    return {{F::Svo, "criticized", "criticize", ""}, {F::Svo, "sued", "sue", ""},
            {F::Svpo, "spoke", "speak", "at"},       {F::Appos, "critic", "", "of"},
            {F::Coord, "", "", ""}};
  if (subj == kOrg && obj == kPer)
    return {{F::Svo, "sued", "sue", ""}, {F::Svo, "praised", "praise", ""}, {F::Svo, "hosted", "host", ""},
            {F::Coord, "", "", ""}};
  if (subj == kOrg && obj == kCity)
    return {{F::Svpo, "expanded", "expand", "into"}, {F::Svpo, "withdrew", "withdraw", "from"},
            {F::Svo, "sponsored", "sponsor", ""}, {F::Coord, "", "", ""}};
  return {{F::Coord, "", "", ""}};
}

struct GeneratorSpec {
  int relations = 8;
  int train = 2000;
  int dev = 400;
  int test = 500;
  std::uint64_t seed = 13;
  double rule_coverage = 0.25;
  double negative_fraction = 0.3;
  int templates_per_relation = 99;           // capped by the bank
  std::map<std::string, int> templates_for;  // per-relation override
  double adverb_prob = 0.3;
  double lead_prob = 0.25;
  double tail_prob = 0.35;

  void validate() const {
    if (relations < 2 || relations > static_cast<int>(relation_bank().size()))
      throw ConfigError("relations must lie in [2, " + std::to_string(relation_bank().size()) + "]");
    if (train < 0 || dev < 0 || test < 0) throw ConfigError("partition sizes must be non-negative");
    if (rule_coverage < 0.0 || rule_coverage > 1.0) throw ConfigError("rule_coverage must lie in [0, 1]");
    if (negative_fraction < 0.0 || negative_fraction >= 1.0)
      throw ConfigError("negative_fraction must lie in [0, 1)");
    if (templates_per_relation <= 0) throw ConfigError("templates_per_relation must be positive");
    for (const auto& [label, k] : templates_for) {
      bool known = false;
      for (int r = 0; r < relations; ++r) known = known || relation_bank()[r].label == label;
      if (!known) throw ConfigError("templates." + label + ": relation not declared");
      if (k <= 0) throw ConfigError("relation '" + label + "' declares zero templates");
    }
  }

  static GeneratorSpec from(const KeyedConfig& c) {
    GeneratorSpec s;
    for (const auto& [k, v] : c.values()) {
      if (starts_with(k, "templates.")) {
        s.templates_for[k.substr(10)] = c.get<int>(k, 0);
        continue;
      }
      static const std::set<std::string> known{"relations",  "train",       "dev",          "test",
                                               "seed",       "rule_coverage", "negative_fraction",
                                               "templates_per_relation",    "adverb_prob", "lead_prob",
                                               "tail_prob"};
      if (!known.count(k)) throw ConfigError("unknown generator key '" + k + "'");
    }
    s.relations = c.get("relations", s.relations);
    s.train = c.get("train", s.train);
    s.dev = c.get("dev", s.dev);
    s.test = c.get("test", s.test);
    s.seed = c.get("seed", s.seed);
    s.rule_coverage = c.get("rule_coverage", s.rule_coverage);
    s.negative_fraction = c.get("negative_fraction", s.negative_fraction);
    s.templates_per_relation = c.get("templates_per_relation", s.templates_per_relation);
    s.adverb_prob = c.get("adverb_prob", s.adverb_prob);
    s.lead_prob = c.get("lead_prob", s.lead_prob);
    s.tail_prob = c.get("tail_prob", s.tail_prob);
    s.validate();
    return s;
  }
};

struct SyntheticCorpus {
  Corpus corpus;
  RuleSet manual_rules;
  HumanAnnotationFile test_annotations;
  std::map<std::string, std::vector<int>> gold_rationales;  // template trigger tokens per positive
};

namespace detail {

struct SentenceBuilder {
  std::vector<Token> tokens;

  int add(const std::string& form, const std::string& lemma, const std::string& pos,
          const std::string& deprel, const std::string& ner = "O") {
    tokens.push_back({form, lemma.empty() ? to_lower(form) : lemma, pos, ner, kRoot, deprel});
    return static_cast<int>(tokens.size()) - 1;
  }
  void attach(int dep, int head) { tokens[dep].head = head; }
};

struct EntityName {
  std::vector<std::string> words;
};

inline EntityName entity_name(const std::string& type, Rng& rng) {
  static const std::vector<std::string> first{"John", "Emma", "Maria", "David", "Sofia", "Omar", "Lena",
                                              "Carlos", "Aiko", "Peter", "Nadia", "Victor", "Grace", "Hugo",
                                              "Irene", "Jamal", "Karin", "Luis", "Mei", "Noah"};
  static const std::vector<std::string> last{"Smith", "Lopez", "Tanaka", "Novak", "Okafor", "Brown",
                                             "Rossi", "Kim", "Haddad", "Weber", "Silva", "Chen"};
  static const std::vector<std::string> orgs{"Acme", "Globex", "Initech", "Hooli", "Vandelay", "Tyrell",
                                             "Cyberdyne", "Oxford", "Stanford", "Soylent", "Wonka", "Umbra"};
  static const std::vector<std::string> org_suffix{"Corp", "Inc", "University", "Group"};
  static const std::vector<std::string> cities{"London", "Paris", "Berlin", "Madrid", "Rome",  "Chicago",
                                               "Boston", "Tokyo",  "Lima",   "Cairo",  "Oslo", "Dublin"};
  static const std::vector<std::vector<std::string>> cities2{
      {"New", "York"}, {"Los", "Angeles"}, {"San", "Diego"}, {"Buenos", "Aires"}};
  EntityName e;
  if (type == kPer) {
    e.words.push_back(rng.pick(first));
    if (rng.uniform() < 0.4) e.words.push_back(rng.pick(last));
  } else if (type == kOrg) {
    e.words.push_back(rng.pick(orgs));
    if (rng.uniform() < 0.4) e.words.push_back(rng.pick(org_suffix));
  } else {
    if (rng.uniform() < 0.25) e.words = rng.pick(cities2);
    else e.words.push_back(rng.pick(cities));
  }
  return e;
}

/// Adds the entity tokens; returns (span, syntactic head).
inline std::pair<Span, int> add_entity(SentenceBuilder& b, const EntityName& name, const std::string& type,
                                       const std::string& deprel) {
  int first = static_cast<int>(b.tokens.size());
  for (std::size_t i = 0; i < name.words.size(); ++i) b.add(name.words[i], name.words[i], "NNP", "compound", type);
  int last = static_cast<int>(b.tokens.size()) - 1;
  b.tokens[last].deprel = deprel;
  for (int i = first; i < last; ++i) b.attach(i, last);
  return {{first, last}, last};
}

struct Rendered {
  RelationInstance inst;
  std::vector<int> trigger;  // template trigger tokens
  std::vector<int> extras;   // distractor tokens between the entities
};

struct RenderOptions {
  bool adverb = false;
  int lead = 0;  // 0 none, 1 "Yesterday ,", 2 "In 2010 ,"
  int tail = 0;  // 0 none, 1 "on Monday", 2 "last year"
};

inline Rendered render(const Lexeme& lex, const std::string& subj_type, const std::string& obj_type,
                       const EntityName& subj_name, const EntityName& obj_name, const RenderOptions& opt,
                       Rng& rng) {
  static const std::vector<std::string> adverbs{"reportedly", "also", "later", "once"};
  static const std::vector<std::pair<std::string, std::string>> closing{
      {"spoke", "speak"}, {"arrived", "arrive"}, {"smiled", "smile"}, {"agreed", "agree"}};
  SentenceBuilder b;
  Rendered r;
  std::vector<int> lead_tokens;
  if (opt.lead == 1) {
    lead_tokens.push_back(b.add("Yesterday", "yesterday", "NN", "obl:tmod"));
    lead_tokens.push_back(b.add(",", ",", ",", "punct"));
  } else if (opt.lead == 2) {
    lead_tokens.push_back(b.add("In", "in", "IN", "case"));
    lead_tokens.push_back(b.add("2010", "2010", "CD", "obl"));
    lead_tokens.push_back(b.add(",", ",", ",", "punct"));
  }

  int root = -1;
  Span subj{}, obj{};
  const std::string head_lemma = lex.head_lemma.empty() ? to_lower(lex.head) : lex.head_lemma;
  auto maybe_adverb = [&](int& adv) {
    if (opt.adverb) adv = b.add(rng.pick(adverbs), "", "RB", "advmod");
  };

  switch (lex.frame) {
    case Frame::Svo:
    case Frame::Svpo: {
      auto [s, sh] = add_entity(b, subj_name, subj_type, "nsubj");
      int adv = -1;
      maybe_adverb(adv);
      int v = b.add(lex.head, head_lemma, "VBD", "root");
      int p = lex.frame == Frame::Svpo ? b.add(lex.prep, "", "IN", "case") : -1;
      auto [o, oh] = add_entity(b, obj_name, obj_type, lex.frame == Frame::Svpo ? "obl" : "obj");
      b.attach(sh, v);
      b.attach(oh, v);
      if (adv >= 0) b.attach(adv, v), r.extras.push_back(adv);
      if (p >= 0) b.attach(p, oh);
      root = v;
      subj = s;
      obj = o;
      r.trigger = p >= 0 ? std::vector<int>{v, p} : std::vector<int>{v};
      break;
    }
    case Frame::Passive: {
      auto [s, sh] = add_entity(b, subj_name, subj_type, "nsubj:pass");
      int adv = -1;
      maybe_adverb(adv);
      int aux = b.add("was", "be", "VBD", "aux:pass");
      int v = b.add(lex.head, head_lemma, "VBN", "root");
      int p = b.add(lex.prep, "", "IN", "case");
      auto [o, oh] = add_entity(b, obj_name, obj_type, "obl");
      b.attach(sh, v);
      b.attach(aux, v);
      b.attach(oh, v);
      b.attach(p, oh);
      if (adv >= 0) b.attach(adv, v), r.extras.push_back(adv);
      root = v;
      subj = s;
      obj = o;
      r.trigger = {aux, v, p};
      break;
    }
    case Frame::Appos: {
      auto [s, sh] = add_entity(b, subj_name, subj_type, "nsubj");
      int c1 = b.add(",", ",", ",", "punct");
      int det = b.add("the", "", "DT", "det");
      int n = b.add(lex.head, head_lemma, "NN", "appos");
      int p = b.add(lex.prep, "", "IN", "case");
      auto [o, oh] = add_entity(b, obj_name, obj_type, "nmod");
      int c2 = b.add(",", ",", ",", "punct");
      const auto& cl = rng.pick(closing);
      int v = b.add(cl.first, cl.second, "VBD", "root");
      b.attach(sh, v);
      b.attach(c1, sh);
      b.attach(det, n);
      b.attach(n, sh);
      b.attach(p, oh);
      b.attach(oh, n);
      b.attach(c2, sh);
      root = v;
      subj = s;
      obj = o;
      r.trigger = {n, p};
      r.extras = {c1, det};
      break;
    }
    case Frame::Poss: {
      auto [s, sh] = add_entity(b, subj_name, subj_type, "nmod:poss");
      int pos = b.add("'s", "'s", "POS", "case");
      int n = b.add(lex.head, head_lemma, "NN", "nsubj");
      int c1 = b.add(",", ",", ",", "punct");
      auto [o, oh] = add_entity(b, obj_name, obj_type, "appos");
      int c2 = b.add(",", ",", ",", "punct");
      const auto& cl = rng.pick(closing);
      int v = b.add(cl.first, cl.second, "VBD", "root");
      b.attach(sh, n);
      b.attach(pos, sh);
      b.attach(n, v);
      b.attach(c1, oh);
      b.attach(oh, n);
      b.attach(c2, oh);
      root = v;
      subj = s;
      obj = o;
      r.trigger = {n};
      r.extras = {pos, c1};
      break;
    }
    case Frame::Copula: {
      auto [s, sh] = add_entity(b, subj_name, subj_type, "nsubj");
      int cop = b.add("is", "be", "VBZ", "cop");
      int det = b.add("the", "", "DT", "det");
      int n = b.add(lex.head, head_lemma, "NN", "root");
      int p = b.add(lex.prep, "", "IN", "case");
      auto [o, oh] = add_entity(b, obj_name, obj_type, "nmod");
      b.attach(sh, n);
      b.attach(cop, n);
      b.attach(det, n);
      b.attach(p, oh);
      b.attach(oh, n);
      root = n;
      subj = s;
      obj = o;
      r.trigger = {n, p};
      r.extras = {cop, det};
      break;
    }
    case Frame::Coord: {
      auto [s, sh] = add_entity(b, subj_name, subj_type, "nsubj");
      int cc = b.add("and", "", "CC", "cc");
      auto [o, oh] = add_entity(b, obj_name, obj_type, "conj");
      const auto& cl = rng.pick(closing);
      int v = b.add(cl.first, cl.second, "VBD", "root");
      b.attach(sh, v);
      b.attach(cc, oh);
      b.attach(oh, sh);
      root = v;
      subj = s;
      obj = o;
      r.extras = {cc};
      break;
    }
  }

  if (opt.tail == 1) {
    int on = b.add("on", "", "IN", "case");
    int day = b.add("Monday", "monday", "NNP", "obl");
    b.attach(on, day);
    b.attach(day, root);
  } else if (opt.tail == 2) {
    int last = b.add("last", "", "JJ", "amod");
    int year = b.add("year", "", "NN", "obl:tmod");
    b.attach(last, year);
    b.attach(year, root);
  }
  int stop = b.add(".", ".", ".", "punct");
  b.attach(stop, root);
  if (opt.lead == 1) {
    b.attach(lead_tokens[0], root);
    b.attach(lead_tokens[1], root);
  } else if (opt.lead == 2) {
    b.attach(lead_tokens[0], lead_tokens[1]);
    b.attach(lead_tokens[1], root);
    b.attach(lead_tokens[2], root);
  }

  r.inst.tokens = std::move(b.tokens);
  r.inst.subj = subj;
  r.inst.obj = obj;
  r.inst.subj_type = subj_type;
  r.inst.obj_type = obj_type;
  return r;
}

inline std::string join_words(const std::vector<std::string>& w) {
  std::string out;
  for (const auto& s : w) out += (out.empty() ? "" : " ") + s;
  return out;
}

/// One manual rule extracting `lex`. Verbal frames get surface rules, nominal
/// frames and transitive verbs get syntactic rules.
inline Rule manual_rule(const RelationTemplate& rel, const Lexeme& lex, int index) {
  Rule r;
  r.label = rel.label;
  r.provenance = Provenance::Manual;
  std::string base = rel.label.substr(rel.label.find(':') + 1);
  r.id = "manual_" + base + "_" + std::to_string(index);
  using K = SurfaceElement::Kind;
  switch (lex.frame) {
    case Frame::Svpo:
      r.body = SurfaceRule{{{K::Subj, rel.subj_type}, {K::Gap, ""}, {K::Literal, lex.head}, {K::Literal, lex.prep},
                            {K::Gap, ""}, {K::Obj, rel.obj_type}}};
      break;
    case Frame::Passive:
      r.body = SurfaceRule{{{K::Subj, rel.subj_type}, {K::Gap, ""}, {K::Literal, "was"}, {K::Literal, lex.head},
                            {K::Literal, lex.prep}, {K::Gap, ""}, {K::Obj, rel.obj_type}}};
      break;
    case Frame::Svo: {
      SyntacticRule s;
      s.trigger = {TriggerField::Lemma, {{lex.head_lemma.empty() ? lex.head : lex.head_lemma}}};
      s.subject = {rel.subj_type, {{Direction::Down, "nsubj", false}}};
      s.object = {rel.obj_type, {{Direction::Down, "obj", false}}};
      r.body = s;
      break;
    }
    case Frame::Appos: {
      SyntacticRule s;
      s.trigger = {TriggerField::Word, {{lex.head, lex.prep}}};
      s.subject = {rel.subj_type, {{Direction::Up, "appos", false}}};
      s.object = {rel.obj_type, {{Direction::Down, "nmod", false}}};
      r.body = s;
      break;
    }
    case Frame::Poss: {
      SyntacticRule s;
      s.trigger = {TriggerField::Word, {{lex.head}}};
      s.subject = {rel.subj_type, {{Direction::Down, "nmod:poss", false}}};
      s.object = {rel.obj_type, {{Direction::Down, "appos", false}}};
      r.body = s;
      break;
    }
    case Frame::Copula: {
      SyntacticRule s;
      s.trigger = {TriggerField::Word, {{lex.head, lex.prep}}};
      s.subject = {rel.subj_type, {{Direction::Down, "nsubj", false}}};
      s.object = {rel.obj_type, {{Direction::Down, "nmod", false}}};
      r.body = s;
      break;
    }
    case Frame::Coord:
      throw ConfigError("coordination templates cannot be covered by rules");
  }
  return r;
}

}  // namespace detail

/// Deterministic for a fixed (spec, seed). Label counts depend only on the spec.
inline SyntheticCorpus gen_synthetic(const GeneratorSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(seed);
  SyntheticCorpus out;

  std::vector<RelationTemplate> rels(relation_bank().begin(), relation_bank().begin() + spec.relations);
  for (auto& rel : rels) {
    int k = spec.templates_per_relation;
    if (auto it = spec.templates_for.find(rel.label); it != spec.templates_for.end()) k = it->second;
    if (k < static_cast<int>(rel.lexemes.size())) rel.lexemes.resize(k);
  }

  int rule_index = 0;
  for (const auto& rel : rels)
    for (const auto& lex : rel.lexemes)
      if (lex.covered) out.manual_rules.rules.push_back(detail::manual_rule(rel, lex, ++rule_index));

  std::vector<std::pair<std::string, std::string>> type_pairs;
  for (const auto& rel : rels) {
    std::pair<std::string, std::string> tp{rel.subj_type, rel.obj_type};
    if (std::find(type_pairs.begin(), type_pairs.end(), tp) == type_pairs.end()) type_pairs.push_back(tp);
  }

  struct Slot {
    int relation = -1;  // -1: NO_RELATION
    bool covered = false;
  };

  auto make_split = [&](const std::string& name, int size, bool annotate) {
    std::vector<Slot> slots;
    const int negatives = static_cast<int>(std::lround(spec.negative_fraction * size));
    const int positives = size - negatives;
    std::vector<int> per_rel(rels.size(), positives / static_cast<int>(rels.size()));
    for (int r = 0; r < positives % static_cast<int>(rels.size()); ++r) ++per_rel[r];
    for (std::size_t r = 0; r < rels.size(); ++r) {
      bool has_covered = false, has_uncovered = false;
      for (const auto& lex : rels[r].lexemes) (lex.covered ? has_covered : has_uncovered) = true;
      int cov = static_cast<int>(std::lround(spec.rule_coverage * per_rel[r]));
      if (!has_covered) cov = 0;
      if (!has_uncovered) cov = per_rel[r];
      for (int i = 0; i < per_rel[r]; ++i) slots.push_back({static_cast<int>(r), i < cov});
    }
    for (int i = 0; i < negatives; ++i) slots.push_back({-1, false});
    rng.shuffle(slots);

    std::vector<RelationInstance> instances;
    for (std::size_t i = 0; i < slots.size(); ++i) {
      const auto& slot = slots[i];
      Lexeme lex;
      std::string subj_type, obj_type, label = kNoRelation;
      if (slot.relation >= 0) {
        const auto& rel = rels[slot.relation];
        std::vector<Lexeme> pool;
        for (const auto& l : rel.lexemes)
          if (l.covered == slot.covered) pool.push_back(l);
        lex = rng.pick(pool);
        subj_type = rel.subj_type;
        obj_type = rel.obj_type;
        label = rel.label;
      } else {
        const auto& tp = rng.pick(type_pairs);
        subj_type = tp.first;
        obj_type = tp.second;
        lex = rng.pick(distractor_lexemes(subj_type, obj_type));
      }
      detail::RenderOptions opt;
      bool verbal = lex.frame == Frame::Svo || lex.frame == Frame::Svpo || lex.frame == Frame::Passive;
      opt.adverb = verbal && rng.uniform() < spec.adverb_prob;
      opt.lead = rng.uniform() < spec.lead_prob ? 1 + static_cast<int>(rng.below(2)) : 0;
      opt.tail = rng.uniform() < spec.tail_prob ? 1 + static_cast<int>(rng.below(2)) : 0;
      auto subj_name = detail::entity_name(subj_type, rng);
      auto obj_name = detail::entity_name(obj_type, rng);
      if (subj_type == obj_type)
        while (obj_name.words == subj_name.words) obj_name = detail::entity_name(obj_type, rng);
      auto rendered = detail::render(lex, subj_type, obj_type, subj_name, obj_name, opt, rng);
      auto& inst = rendered.inst;
      char id[64];
      std::snprintf(id, sizeof id, "%s-%05zu", name.c_str(), i);
      inst.id = id;
      inst.relation = label;
      validate_instance(inst);

      if (inst.is_positive()) {
        out.gold_rationales[inst.id] = rendered.trigger;
        if (annotate) {
          HumanAnnotation h{inst.id, rendered.trigger, rendered.trigger};
          double u = rng.uniform();
          if (u < 0.3 && h.annotator_b.size() > 1) h.annotator_b.pop_back();
          else if (u < 0.5 && !rendered.extras.empty()) {
            h.annotator_b.push_back(rendered.extras.front());
            std::sort(h.annotator_b.begin(), h.annotator_b.end());
          }
          out.test_annotations.push_back(std::move(h));
        }
      }
      instances.push_back(std::move(inst));
    }
    return instances;
  };

  out.corpus.train = make_split("train", spec.train, false);
  out.corpus.dev = make_split("dev", spec.dev, false);
  out.corpus.test = make_split("test", spec.test, true);
  out.corpus.build_vocabularies();
  return out;
}

}  // namespace rxf
