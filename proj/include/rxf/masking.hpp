#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rxf/corpus.hpp"

namespace rxf {

/// Encoder input: position 0 is [CLS], position i + 1 holds original token i.
struct MaskedSequence {
  std::vector<int> ids;
  std::vector<std::optional<int>> token_map;  // masked position -> original index

  int size() const { return static_cast<int>(ids.size()); }
  static int position_of(int token) { return token + 1; }
};

/// Masked form of token i: SUBJ-<T> / OBJ-<T> inside entity spans, the word otherwise.
inline std::string masked_form(const RelationInstance& inst, int i) {
  if (inst.subj.contains(i)) return subj_symbol(inst.subj_type);
  if (inst.obj.contains(i)) return obj_symbol(inst.obj_type);
  return inst.tokens[i].form;
}

inline MaskedSequence mask_entities(const RelationInstance& inst, const TokenVocab& vocab) {
  MaskedSequence seq;
  seq.ids.reserve(inst.size() + 1);
  seq.token_map.reserve(inst.size() + 1);
  seq.ids.push_back(vocab.cls_id());
  seq.token_map.push_back(std::nullopt);
  for (int i = 0; i < inst.size(); ++i) {
    seq.ids.push_back(vocab.id_or_unk(masked_form(inst, i)));
    seq.token_map.push_back(i);
  }
  return seq;
}

/// Human-readable rendering, e.g. "[CLS] [SUBJ-PER] was born in [OBJ-CITY] ."
inline std::string render(const MaskedSequence& seq, const TokenVocab& vocab) {
  std::string out;
  for (int p = 0; p < seq.size(); ++p) {
    const auto& sym = vocab.symbol(seq.ids[p]);
    if (!out.empty()) out += ' ';
    bool special = sym.rfind("SUBJ-", 0) == 0 || sym.rfind("OBJ-", 0) == 0;
    out += special ? "[" + sym + "]" : sym;
  }
  return out;
}

}  // namespace rxf
