#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <sstream>

#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace rxf;
using namespace rxf::testing;

namespace {

const std::vector<std::string> kRels{"per:children", "per:city_of_birth", "per:spouse"};

RelationModel small_model(std::uint64_t seed = 1, int d = 16) {
  return random_model({walkthrough(), born_in()}, kRels, tiny_config(d), seed);
}

}  // namespace

TEST(Encode, InferModeIsDeterministic) {
  auto m = small_model();
  auto a = m.encode(walkthrough());
  auto b = m.encode(walkthrough());
  EXPECT_EQ(a.h, b.h);
}

TEST(Encode, ShapesAndAttentionRowsSumToOne) {
  auto m = small_model();
  auto inst = walkthrough();
  auto out = m.encode(inst);
  EXPECT_EQ(out.h.rows(), inst.size() + 1);
  EXPECT_EQ(out.h.cols(), 16);
  ASSERT_EQ(out.attention.size(), 2u);
  for (const auto& layer : out.attention) {
    ASSERT_EQ(layer.size(), 2u);
    for (const auto& head : layer)
      for (Eigen::Index r = 0; r < head.rows(); ++r) EXPECT_NEAR(head.row(r).sum(), 1.0, 1e-6);
  }
}

TEST(Encode, ZeroedSublayersPassEmbeddingsThrough) {
  auto m = small_model();
  for (auto& L : m.params.layers) {
    L.wo.setZero();
    L.bo.setZero();
    L.w2.setZero();
    L.b2.setZero();
  }
  auto inst = born_in();
  inst.tokens.resize(3);  // "John was born" is enough; keep the tree valid
  inst.tokens[0].head = 2;
  inst.tokens[1].head = 2;
  inst.tokens[2].head = kRoot;
  inst.obj = {1, 1};
  auto seq = m.sequence(inst);
  auto out = m.encode(inst);
  for (int p = 0; p < seq.size(); ++p) {
    RowVec want = m.params.tok_emb.row(seq.ids[p]) + m.params.pos_emb.row(p);
    EXPECT_LT((out.h.row(p) - want).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Encode, OverLengthInputIsRejected) {
  auto m = small_model();
  std::vector<int> ids(40, m.vocab.cls_id());
  EXPECT_THROW(encode(m.params, m.config, ids, Mode::Infer), ValidationError);
}

TEST(NrcScore, ZeroWeightsGiveHalfAndSigmoidClosedForm) {
  auto m = small_model();
  auto h = m.encode(walkthrough()).h;
  m.params.nrc_w.setZero();
  m.params.nrc_b.setZero();
  EXPECT_DOUBLE_EQ(nrc_score(m.params, h), 0.5);
  m.params.nrc_w.setConstant(0.25);
  m.params.nrc_b(0, 0) = -0.3;
  const double z = 0.25 * h.row(0).sum() - 0.3;
  EXPECT_NEAR(nrc_score(m.params, h), 1.0 / (1.0 + std::exp(-z)), 1e-15);
  double prev = 0.0;
  for (double b = -3.0; b <= 3.0; b += 0.5) {
    m.params.nrc_b(0, 0) = b;
    double s = nrc_score(m.params, h);
    EXPECT_GT(s, prev);
    prev = s;
  }
}

TEST(EcScores, ZeroHeadAndClamps) {
  auto m = small_model();
  auto inst = born_in();
  auto h = m.encode(inst).h;
  m.params.ec_w.setZero();
  m.params.ec_b.setZero();
  auto s = ec_scores(m.params, h, inst);
  ASSERT_EQ(s.size(), 7u);  // [CLS] + 6 tokens
  EXPECT_EQ(s[0], 0.0);
  EXPECT_EQ(s[1], 0.0);  // subject
  EXPECT_EQ(s[5], 0.0);  // object
  for (int p : {2, 3, 4, 6}) EXPECT_DOUBLE_EQ(s[p], 0.5);
}

TEST(RcDistribution, PoolingAndWidth) {
  auto cfg = tiny_config(8, 1, 2);
  auto m = random_model({walkthrough()}, kRels, cfg, 2);
  EXPECT_EQ(m.params.rc_w.rows(), 24);
  auto inst = walkthrough();
  Mat h = Mat::Random(inst.size() + 1, 8);
  RowVec v = RowVec::LinSpaced(8, -1.0, 1.0);
  auto ctx = context_mask(inst);
  for (int p = 0; p < h.rows(); ++p)
    if (ctx[p]) h.row(p) = v;
  auto f = rc_features(h, rc_pooling(inst, ctx));
  EXPECT_LT((f.segment(0, 8) - v).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LT((f.segment(8, 8) - h.row(1)).cwiseAbs().maxCoeff(), 1e-15);   // subject John
  EXPECT_LT((f.segment(16, 8) - h.row(5)).cwiseAbs().maxCoeff(), 1e-15);  // object Emma

  // singleton pooling is the identity
  std::vector<std::uint8_t> one(ctx.size(), 0);
  one[3] = 1;
  EXPECT_EQ(rc_features(h, rc_pooling(inst, one)).segment(0, 8), h.row(3));
  // empty explanation pools to zero
  std::vector<std::uint8_t> none(ctx.size(), 0);
  EXPECT_TRUE(rc_features(h, rc_pooling(inst, none)).segment(0, 8).isZero());

  m.params.rc_w.setZero();
  m.params.rc_b.setZero();
  auto p = rc_distribution(m.params, h, ctx, inst);
  for (Eigen::Index c = 0; c < p.size(); ++c) EXPECT_DOUBLE_EQ(p(c), 1.0 / 3.0);
}

TEST(RcDistribution, UnmarkedContextRowsDoNotMatter) {
  auto m = small_model(4);
  auto inst = walkthrough();
  auto h = m.encode(inst).h;
  std::vector<std::uint8_t> expl(inst.size() + 1, 0);
  expl[3] = 1;  // daughter
  auto base = rc_distribution(m.params, h, expl, inst);
  Mat h2 = h;
  h2.row(7).setConstant(5.0);  // "likes"
  h2.row(8).setConstant(-3.0);
  EXPECT_EQ(rc_distribution(m.params, h2, expl, inst), base);
}

TEST(JointLoss, ClosedForms) {
  const std::vector<double> none;
  const std::vector<int> no_targets;
  const std::vector<std::uint8_t> no_mask;
  auto l = joint_loss(0.5, 1, none, no_targets, no_mask, none, -1);
  EXPECT_NEAR(l.total(), -std::log(0.5), 1e-12);
  EXPECT_NEAR(l.total(), 0.693147, 1e-6);

  std::vector<double> rc{0.25, 0.25, 0.5};
  auto r = joint_loss(1.0, 1, none, no_targets, no_mask, rc, 0, false);
  EXPECT_NEAR(r.rc, std::log(4.0), 1e-12);
  EXPECT_NEAR(r.rc, 1.386294, 1e-6);

  std::vector<double> ec{1.0, 0.0, 1.0};
  std::vector<int> et{1, 0, 1};
  std::vector<double> exact{0.0, 1.0};
  auto z = joint_loss(1.0, 1, ec, et, no_mask, exact, 1);
  EXPECT_EQ(z.total(), 0.0);

  std::vector<double> ec2{0.7, 0.2, 0.9};
  std::vector<std::uint8_t> mask{1, 0, 1};
  auto parts = joint_loss(0.8, 1, ec2, et, mask, rc, 2);
  EXPECT_NEAR(parts.nrc, -std::log(0.8), 1e-15);
  EXPECT_NEAR(parts.ec, -(std::log(0.7) + std::log(0.9)) / 2.0, 1e-15);
  EXPECT_NEAR(parts.rc, -std::log(0.5), 1e-15);
  EXPECT_NEAR(parts.total(), parts.nrc + parts.ec + parts.rc, 1e-12);

  // negatives carry only the NRC term
  auto neg = joint_loss(0.3, 0, ec2, et, mask, rc, 2);
  EXPECT_NEAR(neg.total(), -std::log(0.7), 1e-15);
  EXPECT_EQ(neg.ec, 0.0);
  EXPECT_EQ(neg.rc, 0.0);
}

TEST(InstanceLoss, MatchesJointLossOnModelOutputs) {
  auto m = small_model(6);
  auto inst = walkthrough();
  auto seq = m.sequence(inst);
  auto t = targets_for(inst, "joint", 0);
  auto l = instance_loss(m.params, m.config, inst, seq.ids, t, Mode::Infer, nullptr, nullptr);
  auto h = m.encode(inst).h;
  auto raw = ec_raw_scores(m.params, h);
  std::vector<int> et(t.ec->begin(), t.ec->end());
  auto p = rc_distribution(m.params, h, t.rc_mask, inst);
  std::vector<double> rc(p.data(), p.data() + p.size());
  auto want = joint_loss(nrc_score(m.params, h), 1, raw, et, context_mask(inst), rc, 0);
  EXPECT_NEAR(l.nrc, want.nrc, 1e-9);
  EXPECT_NEAR(l.ec, want.ec, 1e-9);
  EXPECT_NEAR(l.rc, want.rc, 1e-9);
}

class GradientCheck : public ::testing::TestWithParam<std::string> {};

TEST_P(GradientCheck, AnalyticMatchesCentralDifferences) {
  auto inst = born_in();  // 6 tokens
  auto m = random_model({inst}, kRels, tiny_config(16, 2, 2), 17);
  auto seq = m.sequence(inst);
  auto errs = gradient_errors(m.params, m.config, inst, seq.ids, targets_for(inst, GetParam(), 1));
  for (const auto& [name, e] : errs) EXPECT_LT(e, 1e-4) << name;
}

INSTANTIATE_TEST_SUITE_P(Heads, GradientCheck, ::testing::Values("nrc", "ec", "rc", "joint"));

TEST(AdamW, ZeroLearningRateLeavesParamsUnchanged) {
  auto m = small_model();
  auto before = m.params;
  auto inst = walkthrough();
  auto seq = m.sequence(inst);
  ModelParams grads = m.params.zeros_like();
  instance_loss(m.params, m.config, inst, seq.ids, targets_for(inst, "joint", 0), Mode::Infer, nullptr, &grads);
  AdamW opt(m.params);
  opt.update(m.params, grads, 0.0, 0.01);
  std::vector<Mat> a, b;
  before.for_each([&](const std::string&, const Mat& t, bool) { a.push_back(t); });
  m.params.for_each([&](const std::string&, const Mat& t, bool) { b.push_back(t); });
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i], b[i]);
}

TEST(AdamW, SameSeedGivesBitwiseIdenticalTrajectories) {
  auto run = [] {
    auto cfg = tiny_config();
    cfg.dropout = 0.2;
    auto m = random_model({walkthrough(), born_in()}, kRels, cfg, 3);
    Rng rng(99);
    AdamW opt(m.params);
    for (int step = 0; step < 5; ++step) {
      ModelParams grads = m.params.zeros_like();
      for (const auto& inst : {walkthrough(), born_in()}) {
        auto seq = m.sequence(inst);
        instance_loss(m.params, m.config, inst, seq.ids, targets_for(inst, "joint", 0), Mode::Train, &rng, &grads,
                      0.5);
      }
      opt.update(m.params, grads, 1e-2, 0.01);
    }
    return checkpoint_bytes(m);
  };
  EXPECT_EQ(run(), run());
}

TEST(Schedule, WarmupThenLinearDecay) {
  EXPECT_DOUBLE_EQ(scheduled_lr(1.0, 0, 100, 0.1), 0.1);
  EXPECT_DOUBLE_EQ(scheduled_lr(1.0, 9, 100, 0.1), 1.0);
  EXPECT_GT(scheduled_lr(1.0, 50, 100, 0.1), scheduled_lr(1.0, 90, 100, 0.1));
  EXPECT_GE(scheduled_lr(1.0, 99, 100, 0.1), 0.0);
}

TEST(Checkpoint, RoundTripIsStable) {
  auto m = small_model(8);
  auto bytes = checkpoint_bytes(m);
  std::istringstream in(bytes);
  auto back = read_checkpoint(in);
  EXPECT_EQ(checkpoint_bytes(back), bytes);
  EXPECT_EQ(back.relations, m.relations);
  EXPECT_EQ(back.vocab.symbols(), m.vocab.symbols());
  auto p1 = m.predict(walkthrough());
  auto p2 = back.predict(walkthrough());
  EXPECT_LT((p1.class_probs - p2.class_probs).cwiseAbs().maxCoeff(), 1e-4);
}

TEST(Checkpoint, RejectsVersionAndShapeMismatch) {
  auto m = small_model(8);
  auto bytes = checkpoint_bytes(m);
  auto bad_version = bytes;
  bad_version[4] = 2;
  std::istringstream v(bad_version);
  EXPECT_THROW(read_checkpoint(v), LoadError);

  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  std::istringstream mg(bad_magic);
  EXPECT_THROW(read_checkpoint(mg), LoadError);

  // Same tensors under a header that declares a smaller vocabulary.
  auto smaller = m;
  auto syms = m.vocab.symbols();
  syms.pop_back();
  smaller.vocab = TokenVocab(syms);
  auto hdr_bytes = checkpoint_bytes(smaller);
  auto header_len = [](const std::string& b) {
    return static_cast<std::size_t>(static_cast<unsigned char>(b[8])) |
           (static_cast<std::size_t>(static_cast<unsigned char>(b[9])) << 8);
  };
  std::string spliced = hdr_bytes.substr(0, 12 + header_len(hdr_bytes)) + bytes.substr(12 + header_len(bytes));
  std::istringstream s(spliced);
  EXPECT_THROW(read_checkpoint(s), LoadError);

  std::istringstream truncated(bytes.substr(0, bytes.size() / 2));
  EXPECT_THROW(read_checkpoint(truncated), LoadError);
}

TEST(EmbeddingGradients, ZeroModelGivesZeroSaliency) {
  auto m = small_model();
  m.params.for_each([](const std::string&, Mat& t, bool) { t.setZero(); });
  for (double g : m.embedding_gradients(walkthrough(), 0)) EXPECT_EQ(g, 0.0);
}

TEST(EmbeddingGradients, MatchFiniteDifferences) {
  auto m = small_model(9, 8);
  auto inst = walkthrough();
  auto mask = context_mask(inst);
  const int cls = 1;
  auto g = m.embedding_gradients(inst, cls, mask);
  auto seq = m.sequence(inst);
  const double eps = 1e-5;
  std::vector<double> fd(seq.size(), 0.0);
  for (int p = 0; p < seq.size(); ++p) {
    for (int k = 0; k < m.config.d; ++k) {
      auto probe = m;
      probe.params.pos_emb(p, k) += eps;
      double up = rc_distribution(probe.params, probe.encode(inst).h, mask, inst)(cls);
      probe.params.pos_emb(p, k) -= 2 * eps;
      double down = rc_distribution(probe.params, probe.encode(inst).h, mask, inst)(cls);
      fd[p] += std::abs((up - down) / (2 * eps));
    }
  }
  for (int p = 0; p < seq.size(); ++p) EXPECT_NEAR(g[p], fd[p], 1e-6 + 1e-4 * fd[p]);
  auto rank = [](const std::vector<double>& v) {
    std::vector<int> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return v[a] > v[b]; });
    return idx;
  };
  EXPECT_EQ(rank(g), rank(fd));
}

TEST(RelationModel, AblatedEcGivesEmptyRationale) {
  auto cfg = tiny_config();
  cfg.use_ec = false;
  auto m = random_model({walkthrough()}, kRels, cfg, 1);
  auto p = m.predict(walkthrough());
  EXPECT_EQ(p.rationale.count(), 0);
}

TEST(RelationModel, AblatedNrcAddsNoRelationClass) {
  auto cfg = tiny_config();
  cfg.use_nrc = false;
  auto m = random_model({walkthrough()}, kRels, cfg, 1);
  EXPECT_EQ(m.num_classes(), 4);
  EXPECT_EQ(m.class_label(3), kNoRelation);
  EXPECT_EQ(m.class_index(kNoRelation), 3);
  auto p = m.predict(walkthrough());
  EXPECT_NEAR(p.class_probs.sum(), 1.0, 1e-12);
}
