#pragma once

// Paths through a dependency tree.

#include <algorithm>
#include <string>
#include <utility>
#include <vector>

#include "rxf/corpus.hpp"

namespace rxf {

enum class Direction { Up, Down };  // Up: dependent -> head, Down: head -> dependent

struct PathStep {
  Direction dir = Direction::Down;
  std::string deprel;
  bool optional = false;
  bool operator==(const PathStep&) const = default;
  auto operator<=>(const PathStep&) const = default;
};

using DepPath = std::vector<PathStep>;

/// Odin-style notation: "<rel" is Up, ">rel" is Down, a trailing '?' marks an optional step.
inline std::string to_string(const DepPath& path) {
  std::string out;
  for (const auto& s : path) {
    if (!out.empty()) out += ' ';
    out += (s.dir == Direction::Up ? '<' : '>');
    out += s.deprel;
    if (s.optional) out += '?';
  }
  return out;
}

inline DepPath reversed(const DepPath& path) {
  DepPath out(path.rbegin(), path.rend());
  for (auto& s : out) s.dir = s.dir == Direction::Up ? Direction::Down : Direction::Up;
  return out;
}

inline std::vector<int> depths(const RelationInstance& inst) {
  std::vector<int> depth(inst.size(), -1);
  for (int i = 0; i < inst.size(); ++i) {
    int d = 0;
    for (int cur = inst.tokens[i].head; cur != kRoot; cur = inst.tokens[cur].head) ++d;
    depth[i] = d;
  }
  return depth;
}

/// Unique tree path from `a` to `b`: Up steps to the lowest common ancestor, then Down steps.
inline DepPath tree_path(const RelationInstance& inst, int a, int b) {
  auto depth = depths(inst);
  std::vector<int> up_side, down_side;
  int x = a, y = b;
  while (depth[x] > depth[y]) { up_side.push_back(x); x = inst.tokens[x].head; }
  while (depth[y] > depth[x]) { down_side.push_back(y); y = inst.tokens[y].head; }
  while (x != y) {
    up_side.push_back(x);
    down_side.push_back(y);
    x = inst.tokens[x].head;
    y = inst.tokens[y].head;
  }
  DepPath path;
  for (int node : up_side) path.push_back({Direction::Up, inst.tokens[node].deprel, false});
  for (auto it = down_side.rbegin(); it != down_side.rend(); ++it)
    path.push_back({Direction::Down, inst.tokens[*it].deprel, false});
  return path;
}

struct PathResult {
  DepPath path;
  int from = 0;
  int to = 0;
};

/// Shortest path between any node of `from` and any node of `to`; ties go to the
/// lexicographically smallest (from, to) pair.
inline PathResult shortest_dep_path(const RelationInstance& inst, const std::vector<int>& from,
                                    const std::vector<int>& to) {
  if (from.empty() || to.empty()) throw ValidationError("shortest_dep_path: empty endpoint set");
  std::vector<int> a(from), b(to);
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  PathResult best;
  bool found = false;
  for (int s : a) {
    for (int t : b) {
      if (s < 0 || s >= inst.size() || t < 0 || t >= inst.size())
        throw ValidationError("shortest_dep_path: index out of bounds");
      DepPath p = tree_path(inst, s, t);
      if (!found || p.size() < best.path.size()) {
        best = {std::move(p), s, t};
        found = true;
      }
    }
  }
  return best;
}

inline std::vector<int> span_indices(const Span& s) {
  std::vector<int> out;
  for (int i = s.first; i <= s.last; ++i) out.push_back(i);
  return out;
}

}  // namespace rxf
