#pragma once

// Hand-built instances and small models shared by the unit and acceptance tests.

#include <string>
#include <vector>

#include "rxf/rxf.hpp"

namespace rxf::testing {

struct Tok {
  const char* form;
  int head;  // 0-based, -1 for root
  const char* deprel;
};

inline RelationInstance make_instance(const std::string& id, const std::vector<Tok>& toks, Span subj, Span obj,
                                      const std::string& subj_type, const std::string& obj_type,
                                      const std::string& relation) {
  RelationInstance inst;
  inst.id = id;
  for (const auto& t : toks) {
    Token tok;
    tok.form = t.form;
    tok.lemma = to_lower(t.form);
    tok.pos = "X";
    tok.ner = "O";
    tok.head = t.head;
    tok.deprel = t.deprel;
    inst.tokens.push_back(tok);
  }
  inst.subj = subj;
  inst.obj = obj;
  inst.subj_type = subj_type;
  inst.obj_type = obj_type;
  inst.relation = relation;
  validate_instance(inst);
  return inst;
}

/// "John 's daughter , Emma , likes swimming ."
inline RelationInstance walkthrough() {
  return make_instance("walk", {{"John", 2, "nmod:poss"},
                                {"'s", 0, "case"},
                                {"daughter", 6, "nsubj"},
                                {",", 4, "punct"},
                                {"Emma", 2, "appos"},
                                {",", 4, "punct"},
                                {"likes", -1, "root"},
                                {"swimming", 6, "xcomp"},
                                {".", 6, "punct"}},
                       {0, 0}, {4, 4}, "PERSON", "PERSON", "per:children");
}

/// "John was born in London ."
inline RelationInstance born_in(const std::string& subj_type = "PER", const std::string& relation = "per:city_of_birth") {
  return make_instance("born", {{"John", 2, "nsubj:pass"},
                                {"was", 2, "aux:pass"},
                                {"born", -1, "root"},
                                {"in", 4, "case"},
                                {"London", 2, "obl"},
                                {".", 2, "punct"}},
                       {0, 0}, {4, 4}, subj_type, "CITY", relation);
}

inline const char* kWalkthroughRule =
    "id: daughter\n"
    "kind: syntactic\n"
    "label: per:children\n"
    "trigger: [word=/daughter/]\n"
    "subject: SUBJ_Person = nmod:poss\n"
    "object: OBJ_Person = appos\n";

inline const char* kBornInRule =
    "id: born_in\n"
    "kind: surface\n"
    "label: per:city_of_birth\n"
    "pattern: SUBJ-PER was born in * OBJ-CITY\n";

/// Random dependency tree over n tokens: a random order, each node after the
/// first attached to a random earlier node. Deprels are drawn from a few labels.
inline RelationInstance random_tree(int n, Rng& rng) {
  static const std::vector<std::string> rels{"nsubj", "obj", "obl", "amod", "case"};
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  rng.shuffle(order);
  RelationInstance inst;
  inst.id = "tree";
  inst.tokens.resize(n);
  for (int i = 0; i < n; ++i) {
    inst.tokens[i].form = "w" + std::to_string(i);
    inst.tokens[i].lemma = inst.tokens[i].form;
  }
  inst.tokens[order[0]].head = kRoot;
  inst.tokens[order[0]].deprel = "root";
  for (int k = 1; k < n; ++k) {
    inst.tokens[order[k]].head = order[rng.below(k)];
    inst.tokens[order[k]].deprel = rng.pick(rels);
  }
  inst.subj = {0, 0};
  inst.obj = {n - 1, n - 1};
  inst.subj_type = "A";
  inst.obj_type = "B";
  return inst;
}

inline ModelConfig tiny_config(int d = 16, int layers = 2, int heads = 2) {
  ModelConfig c;
  c.d = d;
  c.layers = layers;
  c.heads = heads;
  c.ff_mult = 2;
  c.dropout = 0.0;
  c.max_seq_len = 32;
  return c;
}

/// Vocabulary covering the given instances.
inline TokenVocab vocab_for(const std::vector<RelationInstance>& instances) {
  Corpus c;
  c.train = instances;
  c.build_vocabularies();
  return c.vocab;
}

/// A randomly initialised model over `instances` with the given relations.
inline RelationModel random_model(const std::vector<RelationInstance>& instances, std::vector<std::string> rels,
                                  const ModelConfig& cfg, std::uint64_t seed, double scale = 1.0) {
  RelationModel m(cfg, vocab_for(instances), std::move(rels));
  Rng rng(seed);
  m.initialize(rng);
  if (scale != 1.0) m.params.for_each([&](const std::string&, Mat& t, bool) { t *= scale; });
  return m;
}

}  // namespace rxf::testing
