#pragma once

#include <cstdint>
#include <vector>

#include "rxf/corpus.hpp"

namespace rxf {

enum class ExplanationSource { Rule, Latent, Predicted };

/// Per-token importance bits aligned with the masked sequence: bit 0 is [CLS],
/// bit i + 1 is original token i. [CLS] and entity positions are always 0.
struct ExplanationLabels {
  std::vector<std::uint8_t> bits;
  ExplanationSource source = ExplanationSource::Predicted;

  int size() const { return static_cast<int>(bits.size()); }
  int count() const {
    int c = 0;
    for (auto b : bits) c += b;
    return c;
  }
  bool operator==(const ExplanationLabels& o) const { return bits == o.bits; }

  static ExplanationLabels zeros(const RelationInstance& inst, ExplanationSource src) {
    return {std::vector<std::uint8_t>(inst.size() + 1, 0), src};
  }

  static ExplanationLabels from_tokens(const RelationInstance& inst, const std::vector<int>& tokens,
                                       ExplanationSource src) {
    auto e = zeros(inst, src);
    for (int t : tokens)
      if (t >= 0 && t < inst.size() && !inst.in_entity(t)) e.bits[t + 1] = 1;
    return e;
  }

  /// Original token indices marked important, ascending.
  std::vector<int> tokens() const {
    std::vector<int> out;
    for (int p = 1; p < size(); ++p)
      if (bits[p]) out.push_back(p - 1);
    return out;
  }
};

/// Positions the explanation classifier is allowed to mark: not [CLS], not an entity.
inline std::vector<std::uint8_t> context_mask(const RelationInstance& inst) {
  std::vector<std::uint8_t> m(inst.size() + 1, 0);
  for (int i = 0; i < inst.size(); ++i) m[i + 1] = inst.in_entity(i) ? 0 : 1;
  return m;
}

}  // namespace rxf
