// rxf: command-line driver for data generation, training, rule induction and evaluation.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rxf/rxf.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace rxf;

namespace {

constexpr const char* kToolVersion = "0.1.0";

struct Manifest {
  std::string command;
  std::vector<std::string> argv;
  ordered_json configs = ordered_json::object();
  ordered_json seeds = ordered_json::object();
  ordered_json inputs = ordered_json::object();
  ordered_json outputs = ordered_json::object();
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

  void write(const fs::path& path) const {
    ordered_json j;
    j["command"] = command;
    j["argv"] = argv;
    j["configs"] = configs;
    j["seeds"] = seeds;
    j["inputs"] = inputs;
    j["outputs"] = outputs;
    j["tool_version"] = kToolVersion;
    j["wall_clock_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::ofstream out(path);
    if (!out) throw LoadError("cannot write manifest '" + path.string() + "'");
    out << j.dump(2) << '\n';
  }
};

fs::path manifest_path(const fs::path& out) {
  if (fs::is_directory(out)) return out / "manifest.json";
  return fs::path(out.string() + ".manifest.json");
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw LoadError("cannot write '" + path.string() + "'");
  return out;
}

void require_file(const fs::path& path) {
  if (!fs::exists(path)) throw LoadError("no such file or directory: '" + path.string() + "'");
}

std::vector<nlohmann::json> read_jsonl(const fs::path& path) {
  require_file(path);
  std::ifstream in(path);
  std::vector<nlohmann::json> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      out.push_back(nlohmann::json::parse(line));
    } catch (const nlohmann::json::exception& e) {
      throw LoadError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::map<std::string, std::string> read_labels(const fs::path& path) {
  std::map<std::string, std::string> out;
  for (const auto& rec : read_jsonl(path)) out[rec.at("id").get<std::string>()] = rec.at("label").get<std::string>();
  return out;
}

TokenSets read_rationales(const fs::path& path) {
  TokenSets out;
  for (const auto& rec : read_jsonl(path))
    out[rec.at("id").get<std::string>()] = rec.at("rationale").get<std::vector<int>>();
  return out;
}

void write_report(const fs::path& out, const ordered_json& json, const std::string& table) {
  open_out(out) << json.dump(2) << '\n';
  open_out(fs::path(out).replace_extension(".txt")) << table;
}

TrainConfig load_train_config(const std::string& path) {
  if (path.empty()) return TrainConfig{};
  require_file(path);
  return TrainConfig::from(KeyedConfig::load(path));
}

// ---------------------------------------------------------------------------

void cmd_gen_data(const std::string& spec_path, std::uint64_t seed, const fs::path& out, Manifest& m) {
  require_file(spec_path);
  auto spec = GeneratorSpec::from(KeyedConfig::load(spec_path));
  auto data = gen_synthetic(spec, seed);
  save_corpus(data.corpus, out);
  write_rules(data.manual_rules, (out / "manual.rules").string());
  auto human = open_out(out / "test_human.jsonl");
  write_human_annotations(data.test_annotations, human);
  m.configs["spec"] = spec_path;
  m.seeds["generator"] = seed;
  for (const char* f : {"train.jsonl", "dev.jsonl", "test.jsonl", "manual.rules", "test_human.jsonl"})
    m.outputs[f] = (out / f).string();
}

void cmd_train(const std::string& corpus_dir, const std::string& rules_path, const std::string& config_path,
               const std::string& ablate, const fs::path& out, Manifest& m) {
  require_file(corpus_dir);
  require_file(rules_path);
  auto corpus = load_corpus(corpus_dir);
  auto rules = parse_rules(rules_path);
  auto cfg = load_train_config(config_path);
  if (ablate == "nrc") cfg.model.use_nrc = false;
  else if (ablate == "ec") cfg.model.use_ec = false;
  else if (!ablate.empty()) throw ConfigError("--ablate must be 'nrc' or 'ec'");

  auto labels = annotate_explanations(rules, corpus.train);
  auto result = train(corpus, labels, cfg, [](const EpochLog& e) {
    std::cerr << "epoch " << e.epoch << (e.burn_in ? " (burn-in)" : "") << " loss " << e.loss.total();
    if (e.dev_f1) std::cerr << " dev_f1 " << *e.dev_f1;
    std::cerr << '\n';
  });
  for (const auto& w : result.log.warnings) std::cerr << "warning: " << w << '\n';
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  save_checkpoint(result.model, out.string());
  open_out(fs::path(out.string() + ".log.jsonl")) << result.log.to_jsonl();

  m.inputs["corpus"] = corpus_dir;
  m.inputs["rules"] = rules_path;
  m.configs["train"] = config_path;
  m.seeds["model"] = cfg.model.seed;
  m.outputs["checkpoint"] = out.string();
  m.outputs["log"] = out.string() + ".log.jsonl";
  m.outputs["rule_annotated_train"] = labels.size();
}

void cmd_predict(const std::string& model_path, const std::string& corpus_dir, const std::string& split,
                 const fs::path& out, Manifest& m) {
  require_file(model_path);
  auto model = load_checkpoint(model_path);
  auto corpus = load_corpus(corpus_dir);
  auto os = open_out(out);
  for (const auto& inst : corpus.split(split)) {
    auto p = model.predict(inst);
    ordered_json rec;
    rec["id"] = inst.id;
    rec["label"] = p.label;
    rec["nrc_score"] = p.nrc_score;
    rec["rationale"] = p.rationale.tokens();
    os << rec.dump() << '\n';
  }
  m.inputs["model"] = model_path;
  m.inputs["corpus"] = corpus_dir;
  m.inputs["split"] = split;
  m.outputs["predictions"] = out.string();
}

void cmd_eval_rc(const std::string& pred_path, const std::string& corpus_dir, const std::string& split,
                 const fs::path& out, Manifest& m) {
  auto preds = read_labels(pred_path);
  auto corpus = load_corpus(corpus_dir);
  auto r = rc_micro(preds, gold_labels(corpus.split(split)));
  write_report(out, report_json(r), report_table({{"rc_micro", r}}));
  m.inputs["predictions"] = pred_path;
  m.inputs["corpus"] = corpus_dir;
  m.inputs["split"] = split;
  m.outputs["report"] = out.string();
}

void cmd_eval_ec(const std::string& pred_path, const std::string& corpus_dir, const std::string& split,
                 const std::string& rules_path, const fs::path& out, Manifest& m) {
  auto preds = read_rationales(pred_path);
  auto corpus = load_corpus(corpus_dir);
  require_file(rules_path);
  auto rules = parse_rules(rules_path);
  TokenSets gold;
  for (const auto& [id, e] : annotate_explanations(rules, corpus.split(split))) gold[id] = e.tokens();
  auto r = ec_overlap(preds, gold);
  write_report(out, report_json(r), report_table({{"ec_overlap", r}}));
  m.inputs["predictions"] = pred_path;
  m.inputs["corpus"] = corpus_dir;
  m.inputs["rules"] = rules_path;
  m.inputs["split"] = split;
  m.outputs["report"] = out.string();
}

void cmd_eval_plausibility(const std::string& pred_path, const std::string& human_path, const fs::path& out,
                           Manifest& m) {
  auto preds = read_rationales(pred_path);
  require_file(human_path);
  auto r = plausibility(preds, load_human_annotations(human_path));
  write_report(out, report_json(r), report_table({{"plausibility", r}}));
  m.inputs["predictions"] = pred_path;
  m.inputs["human"] = human_path;
  m.outputs["report"] = out.string();
}

void cmd_gen_rules(const std::string& model_path, const std::string& corpus_dir, const std::string& split,
                   const std::string& manual_path, const std::string& mode, const std::string& config_path,
                   const fs::path& out, Manifest& m) {
  require_file(model_path);
  require_file(manual_path);
  auto model = load_checkpoint(model_path);
  auto corpus = load_corpus(corpus_dir);
  auto manual = parse_rules(manual_path);
  const auto& data = corpus.split(split);
  GenConfig gen;
  gen.source = mode == "gold" ? RuleSourceKind::TrainGold : RuleSourceKind::TestPredicted;
  std::map<std::string, RuleSource> sources;
  if (mode == "gold")
    sources = gold_sources(model, data, annotate_explanations(manual, data), load_train_config(config_path));
  else if (mode == "predicted")
    sources = predicted_sources(model, data);
  else
    throw ConfigError("--mode must be 'gold' or 'predicted'");
  auto rules = generate_rules(data, sources, manual, gen);
  write_rules(rules, out.string());
  m.inputs["model"] = model_path;
  m.inputs["corpus"] = corpus_dir;
  m.inputs["split"] = split;
  m.inputs["manual"] = manual_path;
  m.inputs["mode"] = mode;
  m.configs["train"] = config_path;
  m.outputs["rules"] = out.string();
  m.outputs["rule_count"] = rules.size();
}

void cmd_run_rules(const std::string& rule_list, const std::string& corpus_dir, const std::string& split,
                   const fs::path& out, Manifest& m) {
  std::vector<RuleSet> sets;
  for (const auto& path : rxf::split(rule_list, ',')) {
    require_file(path);
    sets.push_back(parse_rules(path));
    m.inputs["rules"].push_back(path);
  }
  auto merged = merge_rulesets(sets);
  auto corpus = load_corpus(corpus_dir);
  auto os = open_out(out);
  for (const auto& inst : corpus.split(split)) {
    std::optional<RuleMatch> win;
    auto label = predict_with_rules(merged, inst, &win);
    ordered_json rec;
    rec["id"] = inst.id;
    rec["label"] = label;
    rec["rule_id"] = win ? win->rule_id : "";
    rec["rationale"] = win ? win->trigger_tokens : std::vector<int>{};
    os << rec.dump() << '\n';
  }
  m.inputs["corpus"] = corpus_dir;
  m.inputs["split"] = split;
  m.outputs["predictions"] = out.string();
}

void cmd_explain(const std::string& model_path, const std::string& method_name, int topn,
                 const std::string& corpus_dir, const std::string& split, const fs::path& out, Manifest& m) {
  require_file(model_path);
  auto method = parse_attribution_method(method_name);
  auto model = load_checkpoint(model_path);
  auto corpus = load_corpus(corpus_dir);
  auto os = open_out(out);
  for (const auto& inst : corpus.split(split)) {
    ordered_json rec;
    rec["id"] = inst.id;
    rec["method"] = method_name;
    rec["rationale"] = explain(model, inst, method, topn);
    os << rec.dump() << '\n';
  }
  m.inputs["model"] = model_path;
  m.inputs["corpus"] = corpus_dir;
  m.inputs["split"] = split;
  m.inputs["method"] = method_name;
  m.inputs["topn"] = topn;
  m.outputs["rationales"] = out.string();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rxf: relation extraction with rationale classifiers and rule induction"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  Manifest manifest;
  for (int i = 0; i < argc; ++i) manifest.argv.emplace_back(argv[i]);
  std::string out, corpus, split = "test", rules, config, model, pred, human, mode, ablate, spec, method;
  std::uint64_t seed = 13;
  int topn = 3;

  auto* gen = app.add_subcommand("gen-data", "generate a synthetic corpus with manual rules");
  gen->add_option("--spec", spec, "generator config")->required();
  gen->add_option("--seed", seed, "generator seed");
  gen->add_option("--out", out, "output directory")->required();

  auto* tr = app.add_subcommand("train", "train a model");
  tr->add_option("--corpus", corpus)->required();
  tr->add_option("--rules", rules)->required();
  tr->add_option("--config", config)->required();
  tr->add_option("--out", out)->required();
  tr->add_option("--ablate", ablate)->check(CLI::IsMember({"nrc", "ec"}));

  auto* pr = app.add_subcommand("predict", "predict labels and rationales");
  pr->add_option("--model", model)->required();
  pr->add_option("--corpus", corpus)->required();
  pr->add_option("--split", split)->check(CLI::IsMember({"train", "dev", "test"}));
  pr->add_option("--out", out)->required();

  auto* erc = app.add_subcommand("eval-rc", "micro P/R/F1 of relation predictions");
  erc->add_option("--pred", pred)->required();
  erc->add_option("--corpus", corpus)->required();
  erc->add_option("--split", split)->check(CLI::IsMember({"train", "dev", "test"}));
  erc->add_option("--out", out)->required();

  auto* eec = app.add_subcommand("eval-ec", "rationale overlap with rule triggers");
  eec->add_option("--pred", pred)->required();
  eec->add_option("--corpus", corpus)->required();
  eec->add_option("--split", split)->check(CLI::IsMember({"train", "dev", "test"}));
  eec->add_option("--rules", rules)->required();
  eec->add_option("--out", out)->required();

  auto* epl = app.add_subcommand("eval-plausibility", "rationale overlap with human annotations");
  epl->add_option("--pred", pred)->required();
  epl->add_option("--human", human)->required();
  epl->add_option("--out", out)->required();

  auto* gr = app.add_subcommand("gen-rules", "induce rules from a trained model");
  gr->add_option("--model", model)->required();
  gr->add_option("--corpus", corpus)->required();
  gr->add_option("--split", split)->check(CLI::IsMember({"train", "test"}));
  gr->add_option("--manual", rules)->required();
  gr->add_option("--mode", mode)->required()->check(CLI::IsMember({"gold", "predicted"}));
  gr->add_option("--config", config, "training config (latent search thresholds)");
  gr->add_option("--out", out)->required();

  auto* rr = app.add_subcommand("run-rules", "apply rule files in order");
  rr->add_option("--rules", rules, "comma-separated rule files")->required();
  rr->add_option("--corpus", corpus)->required();
  rr->add_option("--split", split)->check(CLI::IsMember({"train", "dev", "test"}));
  rr->add_option("--out", out)->required();

  auto* ex = app.add_subcommand("explain", "rationales from the model or an attribution baseline");
  ex->add_option("--model", model)->required();
  ex->add_option("--method", method)
      ->required()
      ->check(CLI::IsMember({"ours", "attention", "saliency", "occlusion", "greedy", "all-between"}));
  ex->add_option("--topn", topn);
  ex->add_option("--corpus", corpus)->required();
  ex->add_option("--split", split)->check(CLI::IsMember({"train", "dev", "test"}));
  ex->add_option("--out", out)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    auto* sub = app.get_subcommands().front();
    manifest.command = sub->get_name();
    if (sub == gen) cmd_gen_data(spec, seed, out, manifest);
    else if (sub == tr) cmd_train(corpus, rules, config, ablate, out, manifest);
    else if (sub == pr) cmd_predict(model, corpus, split, out, manifest);
    else if (sub == erc) cmd_eval_rc(pred, corpus, split, out, manifest);
    else if (sub == eec) cmd_eval_ec(pred, corpus, split, rules, out, manifest);
    else if (sub == epl) cmd_eval_plausibility(pred, human, out, manifest);
    else if (sub == gr) cmd_gen_rules(model, corpus, split, rules, mode, config, out, manifest);
    else if (sub == rr) cmd_run_rules(rules, corpus, split, out, manifest);
    else if (sub == ex) cmd_explain(model, method, topn, corpus, split, out, manifest);
    manifest.write(manifest_path(out));
  } catch (const std::exception& e) {
    std::cerr << "rxf " << manifest.command << ": " << e.what() << '\n';
    return 1;
  }
  return 0;
}
