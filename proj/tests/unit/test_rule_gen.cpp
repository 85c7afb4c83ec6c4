#include <gtest/gtest.h>

#include "support/fixtures.hpp"

using namespace rxf;
using namespace rxf::testing;

TEST(GenerateRule, WalkthroughInstance) {
  auto inst = walkthrough();
  auto expl = ExplanationLabels::from_tokens(inst, {2}, ExplanationSource::Predicted);
  auto rule = generate_rule(inst, expl, "per:children", Provenance::GenTest, "g1");
  ASSERT_TRUE(rule);
  ASSERT_FALSE(rule->is_surface());
  const auto& s = rule->syntactic();
  EXPECT_EQ(s.trigger.field, TriggerField::Word);
  EXPECT_EQ(s.trigger.alternatives, (std::vector<std::vector<std::string>>{{"daughter"}}));
  EXPECT_EQ(s.subject.path, (DepPath{{Direction::Down, "nmod:poss", false}}));
  EXPECT_EQ(s.object.path, (DepPath{{Direction::Down, "appos", false}}));
  EXPECT_EQ(rule->provenance, Provenance::GenTest);

  auto m = match_rule(*rule, inst);
  ASSERT_TRUE(m);
  EXPECT_EQ(m->trigger_tokens, std::vector<int>{2});
}

TEST(GenerateRule, MultiTokenTriggerAndUpwardPaths) {
  auto inst = born_in();
  auto expl = ExplanationLabels::from_tokens(inst, {1, 2, 3}, ExplanationSource::Predicted);
  auto rule = generate_rule(inst, expl, "per:city_of_birth", Provenance::GenTrain, "g");
  ASSERT_TRUE(rule);
  EXPECT_EQ(rule->syntactic().trigger.alternatives,
            (std::vector<std::vector<std::string>>{{"was", "born", "in"}}));
  auto m = match_rule(*rule, inst);
  ASSERT_TRUE(m);
  EXPECT_EQ(m->trigger_tokens, (std::vector<int>{1, 2, 3}));
}

TEST(GenerateRule, EmptyExplanationGivesNothing) {
  auto inst = walkthrough();
  EXPECT_FALSE(generate_rule(inst, ExplanationLabels::zeros(inst, ExplanationSource::Predicted), "per:children",
                             Provenance::GenTest, "g"));
}

TEST(GenerateRule, TriggerRunPrefersLongestThenNearestSubject) {
  auto inst = walkthrough();  // subject at 0
  auto e = ExplanationLabels::from_tokens(inst, {2, 7, 8}, ExplanationSource::Predicted);
  EXPECT_EQ(trigger_run(inst, e), (std::vector<int>{7, 8}));
  e = ExplanationLabels::from_tokens(inst, {2, 7}, ExplanationSource::Predicted);
  EXPECT_EQ(trigger_run(inst, e), std::vector<int>{2});
}

TEST(GenerateRule, FormatParseRoundTrip) {
  auto inst = walkthrough();
  auto rule = *generate_rule(inst, ExplanationLabels::from_tokens(inst, {2}, ExplanationSource::Predicted),
                             "per:children", Provenance::GenTrain, "gen_train_1");
  RuleSet set;
  set.rules.push_back(rule);
  auto back = parse_rules_text(format_rules(set));
  ASSERT_EQ(back.size(), 1u);
  EXPECT_TRUE(back.rules[0].same_content(rule));
  EXPECT_EQ(back.rules[0].provenance, Provenance::GenTrain);
}

TEST(GenerateRules, EmptyPartitionAndDuplicates) {
  EXPECT_TRUE(generate_rules({}, {}, RuleSet{}, GenConfig{}).empty());

  auto a = walkthrough();
  auto b = walkthrough();
  b.id = "walk2";
  auto expl = ExplanationLabels::from_tokens(a, {2}, ExplanationSource::Predicted);
  std::map<std::string, RuleSource> src{{"walk", {"per:children", expl}}, {"walk2", {"per:children", expl}}};
  auto rules = generate_rules({a, b}, src, RuleSet{}, GenConfig{});
  ASSERT_EQ(rules.size(), 1u);
  EXPECT_EQ(rules.rules[0].id, "gen_train_1");

  GenConfig keep;
  keep.dedupe = false;
  keep.source = RuleSourceKind::TestPredicted;
  auto both = generate_rules({a, b}, src, RuleSet{}, keep);
  ASSERT_EQ(both.size(), 2u);
  EXPECT_EQ(both.rules[1].id, "gen_test_2");
}

TEST(GenerateRules, SkipsInstancesManualRulesCover) {
  auto a = walkthrough();
  auto expl = ExplanationLabels::from_tokens(a, {2}, ExplanationSource::Predicted);
  std::map<std::string, RuleSource> src{{"walk", {"per:children", expl}}};
  auto manual = parse_rules_text(kWalkthroughRule);
  EXPECT_TRUE(generate_rules({a}, src, manual, GenConfig{}).empty());
  GenConfig all;
  all.skip_if_manual_match = false;
  EXPECT_EQ(generate_rules({a}, src, manual, all).size(), 1u);

  std::map<std::string, RuleSource> neg{{"walk", {kNoRelation, expl}}};
  EXPECT_TRUE(generate_rules({a}, neg, RuleSet{}, GenConfig{}).empty());
}

TEST(MergeRulesets, SingleSetIdempotenceAndRecall) {
  GeneratorSpec spec;
  spec.train = 400;
  spec.dev = 0;
  spec.test = 200;
  auto data = gen_synthetic(spec, 5);
  const auto& manual = data.manual_rules;

  auto one = merge_rulesets({manual});
  ASSERT_EQ(one.size(), manual.size());
  for (std::size_t i = 0; i < one.size(); ++i) EXPECT_EQ(one.rules[i].id, manual.rules[i].id);

  auto twice = merge_rulesets({manual, manual});
  EXPECT_EQ(format_rules(twice), format_rules(dedupe(manual)));

  // generated rules from the gold rationales of uncovered training instances
  std::map<std::string, RuleSource> src;
  for (const auto& inst : data.corpus.train)
    if (auto it = data.gold_rationales.find(inst.id); it != data.gold_rationales.end())
      src[inst.id] = {inst.relation, ExplanationLabels::from_tokens(inst, it->second, ExplanationSource::Latent)};
  auto gen = generate_rules(data.corpus.train, src, manual, GenConfig{});
  ASSERT_FALSE(gen.empty());
  auto merged = merge_rulesets({manual, gen});

  auto gold = gold_labels(data.corpus.test);
  auto base = rc_micro(rule_predictions(manual, data.corpus.test), gold);
  auto more = rc_micro(rule_predictions(merged, data.corpus.test), gold);
  EXPECT_GE(more.recall, base.recall);
  EXPECT_GE(more.tp, base.tp);
}

TEST(MergeRulesets, CollidingIdsAreSuffixed) {
  auto a = parse_rules_text(kBornInRule);
  auto b = parse_rules_text(std::string(kBornInRule).replace(std::string(kBornInRule).find("born in"), 7, "born at"));
  auto m = merge_rulesets({a, b});
  ASSERT_EQ(m.size(), 2u);
  EXPECT_EQ(m.rules[0].id, "born_in");
  EXPECT_EQ(m.rules[1].id, "born_in_2");
}
