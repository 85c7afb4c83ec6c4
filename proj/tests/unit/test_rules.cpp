#include <gtest/gtest.h>

#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace rxf;
using namespace rxf::testing;

TEST(ParseRules, WalkthroughRule) {
  auto set = parse_rules_text(kWalkthroughRule);
  ASSERT_EQ(set.size(), 1u);
  const auto& r = set.rules[0];
  EXPECT_EQ(r.label, "per:children");
  ASSERT_FALSE(r.is_surface());
  const auto& s = r.syntactic();
  EXPECT_EQ(s.trigger.field, TriggerField::Word);
  EXPECT_EQ(s.trigger.alternatives, (std::vector<std::vector<std::string>>{{"daughter"}}));
  EXPECT_EQ(s.subject.entity_type, "Person");
  EXPECT_EQ(s.subject.path, (DepPath{{Direction::Down, "nmod:poss", false}}));
  EXPECT_EQ(s.object.path, (DepPath{{Direction::Down, "appos", false}}));
}

TEST(ParseRules, LemmaAlternationWithOptionalUpStep) {
  auto set = parse_rules_text(
      "id: works\nkind: syntactic\nlabel: per:employee_of\n"
      "trigger: [lemma=/work|write|play|consult|serve/]\n"
      "subject: SUBJ_Person = <acl? nsubj\nobject: OBJ_Organization = nmod\n");
  const auto& s = set.rules.at(0).syntactic();
  EXPECT_EQ(s.trigger.field, TriggerField::Lemma);
  EXPECT_EQ(s.trigger.alternatives.size(), 5u);
  EXPECT_EQ(s.trigger.alternatives[4], std::vector<std::string>{"serve"});
  EXPECT_EQ(s.subject.path, (DepPath{{Direction::Up, "acl", true}, {Direction::Up, "nsubj", false}}));
  EXPECT_EQ(s.object.path, (DepPath{{Direction::Down, "nmod", false}}));
}

TEST(ParseRules, EmptyTextGivesEmptySet) {
  EXPECT_TRUE(parse_rules_text("").empty());
  EXPECT_TRUE(parse_rules_text("\n\n# nothing here\n").empty());
}

TEST(ParseRules, SyntaxErrorsCarryLineNumbers) {
  try {
    parse_rules_text("id: a\nkind: syntactic\nlabel: x\ntrigger: color=red\nsubject: A = >x\nobject: B = >y\n");
    FAIL() << "expected RuleSyntaxError";
  } catch (const RuleSyntaxError& e) {
    EXPECT_EQ(e.line, 4);
  }
  EXPECT_THROW(parse_rules_text("id: a\nkind: surface\nlabel: x\npattern: SUBJ-A * * born OBJ-B\n"), ValidationError);
  EXPECT_THROW(parse_rules_text("id: a\nkind: surface\nlabel: x\npattern: born in OBJ-B\n"), ValidationError);
  EXPECT_THROW(parse_rules_text("id: a\nkind: surface\nlabel: x\npattern: SUBJ-A OBJ-B\n"), ValidationError);
  EXPECT_THROW(parse_rules_text(std::string(kBornInRule) + "\n" + kBornInRule), ValidationError);
}

TEST(ParseRules, FormatRoundTrip) {
  auto set = parse_rules_text(std::string(kWalkthroughRule) + "\n" + kBornInRule);
  auto again = parse_rules_text(format_rules(set));
  ASSERT_EQ(again.size(), set.size());
  for (std::size_t i = 0; i < set.size(); ++i) {
    EXPECT_TRUE(again.rules[i].same_content(set.rules[i]));
    EXPECT_EQ(again.rules[i].id, set.rules[i].id);
    EXPECT_EQ(again.rules[i].provenance, set.rules[i].provenance);
  }
}

TEST(MatchRule, SurfaceBornIn) {
  auto rule = parse_rules_text(kBornInRule).rules.at(0);
  auto m = match_rule(rule, born_in());
  ASSERT_TRUE(m);
  EXPECT_EQ(m->trigger_tokens, (std::vector<int>{1, 2, 3}));
  EXPECT_EQ(m->label, "per:city_of_birth");
}

TEST(MatchRule, WalkthroughTrigger) {
  auto rule = parse_rules_text(kWalkthroughRule).rules.at(0);
  auto m = match_rule(rule, walkthrough());
  ASSERT_TRUE(m);
  EXPECT_EQ(m->trigger_tokens, std::vector<int>{2});
}

TEST(MatchRule, EntityTypeGate) {
  auto rule = parse_rules_text(kBornInRule).rules.at(0);
  EXPECT_FALSE(match_rule(rule, born_in("ORG")));
  auto syn = parse_rules_text(kWalkthroughRule).rules.at(0);
  auto w = walkthrough();
  w.obj_type = "CITY";
  EXPECT_FALSE(match_rule(syn, w));
}

TEST(MatchRule, OptionalStepMayBeSkippedOrTaken) {
  // works -> nsubj John directly (step skipped) ...
  auto direct = make_instance("d", {{"John", 1, "nsubj"}, {"works", -1, "root"}, {"for", 3, "case"},
                                    {"Acme", 1, "nmod"}},
                              {0, 0}, {3, 3}, "Person", "Organization", "per:employee_of");
  direct.tokens[1].lemma = "work";
  auto rule = parse_rules_text(
                  "id: w\nkind: syntactic\nlabel: per:employee_of\ntrigger: lemma=work\n"
                  "subject: SUBJ_Person = >acl? >nsubj\nobject: OBJ_Organization = >nmod\n")
                  .rules.at(0);
  EXPECT_TRUE(match_rule(rule, direct));
  auto wrong = direct;
  wrong.tokens[0].deprel = "obj";
  EXPECT_FALSE(match_rule(rule, wrong));
}

TEST(MatchRule, SurfaceAgreesWithExhaustiveEnumerator) {
  Rng rng(5);
  const std::vector<std::string> words{"a", "b", "c"};
  for (int trial = 0; trial < 2000; ++trial) {
    int n = 3 + static_cast<int>(rng.below(10));  // up to 12 tokens
    auto inst = random_tree(n, rng);
    for (auto& t : inst.tokens) t.form = rng.pick(words);
    int s = static_cast<int>(rng.below(n)), o = static_cast<int>(rng.below(n));
    if (s == o) continue;
    inst.subj = {s, s};
    inst.obj = {o, o};
    // random pattern: SUBJ, literals and gaps, OBJ (either order)
    using K = SurfaceElement::Kind;
    std::vector<SurfaceElement> pat;
    pat.push_back({s < o ? K::Subj : K::Obj, s < o ? "A" : "B"});
    int len = 1 + static_cast<int>(rng.below(4));
    bool last_gap = false;
    int literals = 0;
    for (int k = 0; k < len; ++k) {
      if (!last_gap && rng.uniform() < 0.4) {
        pat.push_back({K::Gap, ""});
        last_gap = true;
      } else {
        pat.push_back({K::Literal, rng.pick(words)});
        last_gap = false;
        ++literals;
      }
    }
    if (literals == 0) pat.push_back({K::Literal, rng.pick(words)});
    if (rng.uniform() < 0.5) pat.insert(pat.begin(), {K::Literal, rng.pick(words)});
    pat.push_back({s < o ? K::Obj : K::Subj, s < o ? "B" : "A"});
    Rule rule{"r", "rel", Provenance::Manual, SurfaceRule{pat}};
    auto got = match_rule(rule, inst);
    auto want = surface_oracle(pat, inst);
    ASSERT_EQ(got.has_value(), want.has_value()) << "trial " << trial;
    if (got) ASSERT_EQ(got->trigger_tokens, *want) << "trial " << trial;
  }
}

TEST(MatchRule, SyntacticTriggerNeverInsideEntity) {
  auto w = walkthrough();
  w.tokens[0].form = "daughter";  // subject token spelled like the trigger
  auto rule = parse_rules_text(kWalkthroughRule).rules.at(0);
  auto m = match_rule(rule, w);
  ASSERT_TRUE(m);
  EXPECT_EQ(m->trigger_tokens, std::vector<int>{2});
}

TEST(AnnotateExplanations, BornInInstanceBits) {
  auto rules = parse_rules_text(kBornInRule);
  auto out = annotate_explanations(rules, std::vector<RelationInstance>{born_in()});
  ASSERT_EQ(out.count("born"), 1u);
  EXPECT_EQ(out.at("born").bits, (std::vector<std::uint8_t>{0, 0, 1, 1, 1, 0, 0}));
  EXPECT_EQ(out.at("born").source, ExplanationSource::Rule);
}

TEST(AnnotateExplanations, LabelMismatchIsAbsent) {
  auto rules = parse_rules_text(kBornInRule);
  auto out = annotate_explanations(rules, std::vector<RelationInstance>{born_in("PER", "per:city_of_death")});
  EXPECT_TRUE(out.empty());
  auto neg = annotate_explanations(rules, std::vector<RelationInstance>{born_in("PER", kNoRelation)});
  EXPECT_TRUE(neg.empty());
}

TEST(AnnotateExplanations, SoundAndMonotoneOnSyntheticCorpus) {
  GeneratorSpec spec;
  spec.train = 600;
  spec.dev = 0;
  spec.test = 0;
  auto data = gen_synthetic(spec, 7);
  const auto& rules = data.manual_rules;
  auto full = annotate_explanations(rules, data.corpus.train);
  RuleSet half;
  half.rules.assign(rules.rules.begin(), rules.rules.begin() + static_cast<long>(rules.size() / 2));
  auto partial = annotate_explanations(half, data.corpus.train);
  for (const auto& [id, _] : partial) EXPECT_EQ(full.count(id), 1u);

  std::map<std::string, const RelationInstance*> byid;
  for (const auto& i : data.corpus.train) byid[i.id] = &i;
  for (const auto& [id, labels] : full) {
    const auto& inst = *byid.at(id);
    std::set<int> triggers;
    for (const auto& r : rules.rules)
      if (auto m = match_rule(r, inst); m && m->label == inst.relation)
        triggers.insert(m->trigger_tokens.begin(), m->trigger_tokens.end());
    for (int t : labels.tokens()) EXPECT_TRUE(triggers.count(t)) << id;
    EXPECT_EQ(labels.bits[0], 0);
  }
  double cov = static_cast<double>(full.size());
  long positives = 0;
  for (const auto& i : data.corpus.train) positives += i.is_positive();
  cov /= static_cast<double>(positives);
  EXPECT_GE(cov, 0.20);
  EXPECT_LE(cov, 0.30);
}

TEST(PredictWithRules, NoMatchSingleMatchAndOrder) {
  auto born = parse_rules_text(kBornInRule);
  auto walk = parse_rules_text(kWalkthroughRule);
  EXPECT_EQ(predict_with_rules(RuleSet{}, born_in()), kNoRelation);
  EXPECT_EQ(predict_with_rules(walk, born_in()), kNoRelation);
  EXPECT_EQ(predict_with_rules(born, born_in()), "per:city_of_birth");

  // Two rules that both match, with different labels.
  auto a = parse_rules_text(
      "id: a\nkind: surface\nlabel: per:city_of_birth\npattern: SUBJ-PER * born * OBJ-CITY\n\n"
      "id: b\nkind: surface\nlabel: per:cities_of_residence\npattern: SUBJ-PER * in OBJ-CITY\n");
  RuleSet swapped;
  swapped.rules = {a.rules[1], a.rules[0]};
  std::optional<RuleMatch> win;
  EXPECT_EQ(predict_with_rules(a, born_in(), &win), "per:city_of_birth");
  EXPECT_EQ(win->rule_id, "a");
  EXPECT_EQ(predict_with_rules(swapped, born_in(), &win), "per:cities_of_residence");
  EXPECT_EQ(win->rule_id, "b");
}
