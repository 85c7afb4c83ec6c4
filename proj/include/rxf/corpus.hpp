#pragma once

// Annotated relation instances, corpus files and vocabularies.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "rxf/error.hpp"
#include "rxf/strings.hpp"

namespace rxf {

inline const std::string kNoRelation = "no_relation";
inline constexpr int kRoot = -1;

struct Span {
  int first = 0;
  int last = 0;  // inclusive

  int size() const { return last - first + 1; }
  bool contains(int i) const { return i >= first && i <= last; }
  bool overlaps(const Span& o) const { return first <= o.last && o.first <= last; }
  bool operator==(const Span&) const = default;
};

struct Token {
  std::string form;
  std::string lemma;
  std::string pos;
  std::string ner;
  int head = kRoot;  // 0-based, kRoot for the root
  std::string deprel;
};

struct RelationInstance {
  std::string id;
  std::vector<Token> tokens;
  Span subj;
  Span obj;
  std::string subj_type;
  std::string obj_type;
  std::string relation = kNoRelation;

  int size() const { return static_cast<int>(tokens.size()); }
  bool is_positive() const { return relation != kNoRelation; }
  bool in_entity(int i) const { return subj.contains(i) || obj.contains(i); }
};

/// Throws ValidationError if the instance violates span or tree invariants.
inline void validate_instance(const RelationInstance& inst) {
  const int n = inst.size();
  auto fail = [&](const std::string& why) { throw ValidationError("instance '" + inst.id + "': " + why); };
  if (n == 0) fail("no tokens");
  auto check_span = [&](const Span& s, const char* name) {
    if (s.first > s.last) fail(std::string(name) + " span is empty");
    if (s.first < 0 || s.last >= n) fail(std::string(name) + " span out of bounds");
  };
  check_span(inst.subj, "subject");
  check_span(inst.obj, "object");
  if (inst.subj.overlaps(inst.obj)) fail("subject and object spans overlap");

  int roots = 0;
  for (int i = 0; i < n; ++i) {
    int h = inst.tokens[i].head;
    if (h == kRoot) {
      ++roots;
      continue;
    }
    if (h < 0 || h >= n) fail("head of token " + std::to_string(i) + " out of range");
    if (h == i) fail("token " + std::to_string(i) + " is its own head");
  }
  if (roots != 1) fail("expected exactly one root, found " + std::to_string(roots));
  // Every token must reach the root within n steps.
  for (int i = 0; i < n; ++i) {
    int cur = i;
    int steps = 0;
    while (cur != kRoot) {
      cur = inst.tokens[cur].head;
      if (++steps > n) fail("head cycle through token " + std::to_string(i));
    }
  }
}

/// Ordered symbol list with an index. Unknown symbols map to the unknown id.
class TokenVocab {
 public:
  static constexpr const char* kCls = "[CLS]";
  static constexpr const char* kUnk = "[UNK]";

  TokenVocab() = default;
  explicit TokenVocab(std::vector<std::string> symbols) : symbols_(std::move(symbols)) {
    for (int i = 0; i < static_cast<int>(symbols_.size()); ++i) index_.emplace(symbols_[i], i);
  }

  int size() const { return static_cast<int>(symbols_.size()); }
  bool empty() const { return symbols_.empty(); }
  const std::vector<std::string>& symbols() const { return symbols_; }
  const std::string& symbol(int id) const { return symbols_.at(id); }
  bool contains(const std::string& s) const { return index_.count(s) > 0; }

  std::optional<int> find(const std::string& s) const {
    auto it = index_.find(s);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }
  int id_or_unk(const std::string& s) const {
    auto it = index_.find(s);
    return it == index_.end() ? unk_id() : it->second;
  }
  int cls_id() const { return required(kCls); }
  int unk_id() const { return required(kUnk); }

  bool operator==(const TokenVocab& o) const { return symbols_ == o.symbols_; }

 private:
  int required(const std::string& s) const {
    auto it = index_.find(s);
    if (it == index_.end()) throw ValidationError("vocabulary lacks special symbol " + s);
    return it->second;
  }

  std::vector<std::string> symbols_;
  std::unordered_map<std::string, int> index_;
};

inline std::string subj_symbol(const std::string& type) { return "SUBJ-" + type; }
inline std::string obj_symbol(const std::string& type) { return "OBJ-" + type; }

struct Corpus {
  std::vector<RelationInstance> train;
  std::vector<RelationInstance> dev;
  std::vector<RelationInstance> test;
  std::vector<std::string> relations;  // sorted, excludes kNoRelation
  TokenVocab vocab;

  std::size_t size() const { return train.size() + dev.size() + test.size(); }

  const std::vector<RelationInstance>& split(const std::string& name) const {
    if (name == "train") return train;
    if (name == "dev") return dev;
    if (name == "test") return test;
    throw ConfigError("unknown split '" + name + "' (expected train, dev or test)");
  }

  /// Rebuilds both vocabularies from the partitions. Word forms come from the
  /// training partition; labels and entity types from every partition.
  void build_vocabularies() {
    std::set<std::string> labels;
    std::set<std::string> types;
    std::set<std::string> forms;
    for (const auto* part : {&train, &dev, &test}) {
      for (const auto& inst : *part) {
        if (inst.is_positive()) labels.insert(inst.relation);
        types.insert(inst.subj_type);
        types.insert(inst.obj_type);
      }
    }
    for (const auto& inst : train)
      for (int i = 0; i < inst.size(); ++i)
        if (!inst.in_entity(i)) forms.insert(inst.tokens[i].form);

    relations.assign(labels.begin(), labels.end());
    if (size() == 0) {
      vocab = TokenVocab{};
      return;
    }
    std::vector<std::string> symbols{TokenVocab::kCls, TokenVocab::kUnk};
    for (const auto& t : types) symbols.push_back(subj_symbol(t));
    for (const auto& t : types) symbols.push_back(obj_symbol(t));
    for (const auto& f : forms)
      if (std::find(symbols.begin(), symbols.end(), f) == symbols.end()) symbols.push_back(f);
    vocab = TokenVocab(std::move(symbols));
  }
};

// ---------------------------------------------------------------------------
// Corpus files

enum class CorpusFormat {
  JsonLines,  // one record per line
  JsonArray,  // a single array of records (the original TACRED release layout)
  Directory,  // train.jsonl / dev.jsonl / test.jsonl
};

namespace detail {

template <typename T>
T required_field(const nlohmann::json& rec, const char* key, const std::string& id) {
  if (!rec.contains(key)) throw LoadError("record '" + id + "': missing field '" + key + "'");
  try {
    return rec.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw LoadError("record '" + id + "': field '" + key + "' has the wrong type");
  }
}

}  // namespace detail

inline RelationInstance instance_from_json(const nlohmann::json& rec, const std::string& fallback_id) {
  using detail::required_field;
  if (!rec.is_object()) throw LoadError("record '" + fallback_id + "': not an object");
  RelationInstance inst;
  inst.id = rec.contains("id") && rec["id"].is_string() ? rec["id"].get<std::string>() : fallback_id;
  const auto& id = inst.id;
  if (!rec.contains("id")) throw LoadError("record '" + id + "': missing field 'id'");

  auto forms = required_field<std::vector<std::string>>(rec, "token", id);
  auto pos = required_field<std::vector<std::string>>(rec, "stanford_pos", id);
  auto ner = required_field<std::vector<std::string>>(rec, "stanford_ner", id);
  auto heads = required_field<std::vector<int>>(rec, "stanford_head", id);
  auto deprels = required_field<std::vector<std::string>>(rec, "stanford_deprel", id);
  std::vector<std::string> lemmas;
  if (rec.contains("lemma")) lemmas = required_field<std::vector<std::string>>(rec, "lemma", id);

  const std::size_t n = forms.size();
  if (pos.size() != n || ner.size() != n || heads.size() != n || deprels.size() != n ||
      (!lemmas.empty() && lemmas.size() != n))
    throw LoadError("record '" + id + "': per-token fields have inconsistent lengths");

  inst.tokens.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& t = inst.tokens[i];
    t.form = forms[i];
    t.lemma = lemmas.empty() ? forms[i] : lemmas[i];
    t.pos = pos[i];
    t.ner = ner[i];
    t.head = heads[i] - 1;  // file: 1-based, 0 = ROOT
    t.deprel = deprels[i];
  }
  inst.subj = {required_field<int>(rec, "subj_start", id), required_field<int>(rec, "subj_end", id)};
  inst.obj = {required_field<int>(rec, "obj_start", id), required_field<int>(rec, "obj_end", id)};
  inst.subj_type = required_field<std::string>(rec, "subj_type", id);
  inst.obj_type = required_field<std::string>(rec, "obj_type", id);
  inst.relation = required_field<std::string>(rec, "relation", id);
  validate_instance(inst);
  return inst;
}

inline nlohmann::ordered_json instance_to_json(const RelationInstance& inst) {
  nlohmann::ordered_json rec;
  std::vector<std::string> forms, lemmas, pos, ner, deprels;
  std::vector<int> heads;
  for (const auto& t : inst.tokens) {
    forms.push_back(t.form);
    lemmas.push_back(t.lemma);
    pos.push_back(t.pos);
    ner.push_back(t.ner);
    heads.push_back(t.head + 1);
    deprels.push_back(t.deprel);
  }
  rec["id"] = inst.id;
  rec["relation"] = inst.relation;
  rec["token"] = forms;
  rec["lemma"] = lemmas;
  rec["subj_start"] = inst.subj.first;
  rec["subj_end"] = inst.subj.last;
  rec["obj_start"] = inst.obj.first;
  rec["obj_end"] = inst.obj.last;
  rec["subj_type"] = inst.subj_type;
  rec["obj_type"] = inst.obj_type;
  rec["stanford_pos"] = pos;
  rec["stanford_ner"] = ner;
  rec["stanford_head"] = heads;
  rec["stanford_deprel"] = deprels;
  return rec;
}

inline std::vector<RelationInstance> read_instances(std::istream& in, CorpusFormat format,
                                                    const std::string& origin) {
  std::vector<RelationInstance> out;
  if (format == CorpusFormat::JsonArray) {
    std::stringstream ss;
    ss << in.rdbuf();
    if (trim(ss.str()).empty()) return out;
    nlohmann::json arr;
    try {
      arr = nlohmann::json::parse(ss.str());
    } catch (const nlohmann::json::exception& e) {
      throw LoadError(origin + ": " + e.what());
    }
    if (!arr.is_array()) throw LoadError(origin + ": expected a JSON array");
    for (std::size_t i = 0; i < arr.size(); ++i)
      out.push_back(instance_from_json(arr[i], origin + "#" + std::to_string(i + 1)));
    return out;
  }
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw LoadError(origin + ":" + std::to_string(line_no) + ": " + e.what());
    }
    out.push_back(instance_from_json(rec, origin + ":" + std::to_string(line_no)));
  }
  return out;
}

inline std::vector<RelationInstance> load_instances(const std::filesystem::path& path,
                                                    CorpusFormat format = CorpusFormat::JsonLines) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open corpus file '" + path.string() + "'");
  return read_instances(in, format, path.string());
}

/// Loads a corpus. File formats place every record in the training partition;
/// the directory format reads whichever of train/dev/test.jsonl exist.
inline Corpus load_corpus(const std::filesystem::path& path, CorpusFormat format = CorpusFormat::Directory) {
  Corpus corpus;
  if (format == CorpusFormat::Directory) {
    if (!std::filesystem::is_directory(path))
      throw LoadError("corpus directory '" + path.string() + "' does not exist");
    auto part = [&](const char* name, std::vector<RelationInstance>& dst) {
      auto file = path / (std::string(name) + ".jsonl");
      if (std::filesystem::exists(file)) dst = load_instances(file, CorpusFormat::JsonLines);
    };
    part("train", corpus.train);
    part("dev", corpus.dev);
    part("test", corpus.test);
  } else {
    corpus.train = load_instances(path, format);
  }
  std::set<std::string> ids;
  for (const auto* p : {&corpus.train, &corpus.dev, &corpus.test})
    for (const auto& inst : *p)
      if (!ids.insert(inst.id).second) throw ValidationError("duplicate instance id '" + inst.id + "'");
  corpus.build_vocabularies();
  return corpus;
}

inline void write_instances(std::ostream& out, const std::vector<RelationInstance>& instances) {
  for (const auto& inst : instances) out << instance_to_json(inst).dump() << '\n';
}

inline void save_corpus(const Corpus& corpus, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto part = [&](const char* name, const std::vector<RelationInstance>& src) {
    std::ofstream out(dir / (std::string(name) + ".jsonl"), std::ios::binary);
    if (!out) throw LoadError("cannot write corpus file in '" + dir.string() + "'");
    write_instances(out, src);
  };
  part("train", corpus.train);
  part("dev", corpus.dev);
  part("test", corpus.test);
}

}  // namespace rxf
