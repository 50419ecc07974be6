// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the relit project.

#include <gtest/gtest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "oracles.hpp"
#include "relit/neural/attention.hpp"
#include "relit/neural/demo_training.hpp"
#include "relit/neural/gradcheck.hpp"
#include "relit/neural/losses.hpp"
#include "relit/neural/multi_spade.hpp"

namespace relit::nn {
namespace {

using Rows = std::vector<std::vector<double>>;

Rows tokens(const Tensor4& x, int n = 0) {
  Rows out(x.plane(), std::vector<double>(static_cast<std::size_t>(x.channels())));
  for (int c = 0; c < x.channels(); ++c)
    for (int y = 0; y < x.height(); ++y)
      for (int i = 0; i < x.width(); ++i) out[static_cast<std::size_t>(y) * x.width() + i][c] = x(n, c, y, i);
  return out;
}

Rows rows_of(const Eigen::MatrixXd& m) {
  Rows out(static_cast<std::size_t>(m.rows()), std::vector<double>(static_cast<std::size_t>(m.cols())));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) out[i][j] = m(i, j);
  return out;
}

double max_abs_diff(const Tensor4& a, const Tensor4& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

// Attention ---------------------------------------------------------------------------------

TEST(Attention, SingleTokenCopiesValue) {
  Rng rng(1);
  const AttentionBlock block = AttentionBlock::random(3, 4, 5, rng);
  const Tensor4 feat = Tensor4::random_normal(1, 4, 1, 1, rng);
  const Tensor4 guide = Tensor4::random_normal(1, 3, 2, 2, rng);
  std::vector<Eigen::MatrixXd> weights;
  const Tensor4 out = attention_forward(block, feat, guide, &weights);
  ASSERT_EQ(weights.size(), 1u);
  EXPECT_DOUBLE_EQ(weights[0](0, 0), 1.0);
  for (int e = 0; e < 5; ++e) {
    double v = 0.0;
    for (int c = 0; c < 4; ++c) v += feat(0, c, 0, 0) * block.w_v(c, e);
    EXPECT_NEAR(out(0, e, 0, 0), v, 1e-12);
  }
}

TEST(Attention, RowsSumToOne) {
  Rng rng(2);
  const AttentionBlock block = AttentionBlock::random(3, 4, 4, rng);
  const Tensor4 feat = Tensor4::random_normal(2, 4, 4, 4, rng, 3.0);
  const Tensor4 guide = Tensor4::random_normal(2, 3, 8, 8, rng, 3.0);
  std::vector<Eigen::MatrixXd> weights;
  attention_forward(block, feat, guide, &weights);
  ASSERT_EQ(weights.size(), 2u);
  for (const auto& a : weights) {
    EXPECT_EQ(a.rows(), 16);
    EXPECT_LT((a.rowwise().sum().array() - 1.0).abs().maxCoeff(), 1e-6);
    EXPECT_GE(a.minCoeff(), 0.0);
  }
}

TEST(Attention, MatchesDenseOracle) {
  Rng rng(3);
  for (bool scaled : {true, false}) {
    AttentionBlock block = AttentionBlock::random(2, 3, 4, rng);
    block.scaled = scaled;
    const Tensor4 feat = Tensor4::random_normal(1, 3, 2, 2, rng);
    const Tensor4 guide = Tensor4::random_normal(1, 2, 4, 4, rng);
    const Tensor4 out = attention_forward(block, feat, guide);
    const Rows expect = oracle::attention(tokens(feat), tokens(oracle::avg_pool(guide, 2)),
                                          rows_of(block.w_q), rows_of(block.w_k),
                                          rows_of(block.w_v), scaled ? 0.5 : 1.0);
    for (int t = 0; t < 4; ++t)
      for (int e = 0; e < 4; ++e) EXPECT_NEAR(out(0, e, t / 2, t % 2), expect[t][e], 1e-12);
  }
}

TEST(Attention, MismatchedGuidanceThrows) {
  Rng rng(4);
  const AttentionBlock block = AttentionBlock::random(2, 3, 4, rng);
  EXPECT_THROW(attention_forward(block, Tensor4(1, 3, 4, 4), Tensor4(1, 2, 6, 6)), InputError);
  EXPECT_THROW(attention_forward(block, Tensor4(1, 5, 4, 4), Tensor4(1, 2, 4, 4)), InputError);
}

TEST(Attention, ZeroUpstreamGivesZeroGradients) {
  Rng rng(5);
  const AttentionBlock block = AttentionBlock::random(2, 3, 4, rng);
  const Tensor4 feat = Tensor4::random_normal(1, 3, 3, 3, rng);
  const Tensor4 guide = Tensor4::random_normal(1, 2, 3, 3, rng);
  const AttentionGrads g = attention_backward(block, feat, guide, Tensor4(1, 4, 3, 3));
  EXPECT_EQ(g.w_q.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(g.w_k.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(g.w_v.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(max_abs_diff(g.feat_in, Tensor4::like(feat)), 0.0);
  EXPECT_EQ(max_abs_diff(g.guidance, Tensor4::like(guide)), 0.0);
}

TEST(Attention, FiniteDifferences) {
  const GradcheckReport r = gradcheck_neural(11);
  EXPECT_TRUE(r.passed());
  for (const char* block : {"attention", "multi_spade", "gan_loss", "feature_matching", "perceptual"}) {
    EXPECT_LT(r.block_error(block), kGradcheckTolerance) << block;
    EXPECT_TRUE(std::any_of(r.entries.begin(), r.entries.end(),
                            [&](const GradcheckEntry& e) { return e.block == block && e.checked > 0; }))
        << block;
  }
}

TEST(AttentionProperties, DuplicateTokensReceiveEqualValueGradients) {
  Rng rng(6);
  const AttentionBlock block = AttentionBlock::random(2, 3, 4, rng);
  Tensor4 feat = Tensor4::random_normal(1, 3, 2, 2, rng);
  for (int c = 0; c < 3; ++c) feat(0, c, 1, 1) = feat(0, c, 0, 0);
  const Tensor4 guide = Tensor4::random_normal(1, 2, 2, 2, rng);
  const Tensor4 up = Tensor4::random_normal(1, 4, 2, 2, rng);
  const AttentionGrads g = attention_backward(block, feat, guide, up);
  ASSERT_EQ(g.values.size(), 1u);
  EXPECT_LT((g.values[0].row(0) - g.values[0].row(3)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(AttentionProperties, OutputsInsideValueHull) {
  Rng rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    const AttentionBlock block = AttentionBlock::random(2, 3, 4, rng);
    const Tensor4 feat = Tensor4::random_normal(1, 3, 3, 3, rng, 2.0);
    const Tensor4 guide = Tensor4::random_normal(1, 2, 3, 3, rng, 2.0);
    const Tensor4 out = attention_forward(block, feat, guide);
    Rows values(9, std::vector<double>(4, 0.0));
    const Rows f = tokens(feat);
    for (int t = 0; t < 9; ++t)
      for (int e = 0; e < 4; ++e)
        for (int c = 0; c < 3; ++c) values[t][e] += f[t][c] * block.w_v(c, e);
    for (int e = 0; e < 4; ++e) {
      double lo = 1e300, hi = -1e300;
      for (int t = 0; t < 9; ++t) lo = std::min(lo, values[t][e]), hi = std::max(hi, values[t][e]);
      for (int t = 0; t < 9; ++t) {
        EXPECT_GE(out(0, e, t / 3, t % 3), lo - 1e-12);
        EXPECT_LE(out(0, e, t / 3, t % 3), hi + 1e-12);
      }
    }
  }
}

TEST(AttentionProperties, KeyValuePermutationInvariance) {
  Rng rng(8);
  const AttentionBlock block = AttentionBlock::random(2, 3, 4, rng);
  const Tensor4 feat = Tensor4::random_normal(1, 3, 3, 3, rng);
  const Tensor4 guide = Tensor4::random_normal(1, 2, 3, 3, rng);
  std::array<int, 9> perm{};
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  Tensor4 shuffled = Tensor4::like(feat);
  for (int t = 0; t < 9; ++t)
    for (int c = 0; c < 3; ++c) shuffled(0, c, perm[t] / 3, perm[t] % 3) = feat(0, c, t / 3, t % 3);
  EXPECT_LT(max_abs_diff(attention_forward(block, feat, guide),
                         attention_forward(block, shuffled, guide)),
            1e-12);
}

// Instance norm and Multi-SPADE -------------------------------------------------------------

TEST(InstanceNorm, StandardisesEachPlane) {
  Rng rng(9);
  Tensor4 x = Tensor4::random_normal(2, 3, 5, 5, rng, 4.0);
  for (double& v : x.data()) v += 7.0;
  const Tensor4 y = instance_norm(x);
  for (int n = 0; n < 2; ++n)
    for (int c = 0; c < 3; ++c) {
      double m = 0, s = 0;
      for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j) m += y(n, c, i, j) / 25.0;
      for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j) s += (y(n, c, i, j) - m) * (y(n, c, i, j) - m) / 25.0;
      EXPECT_LT(std::abs(m), 1e-6);
      EXPECT_NEAR(s, 1.0, 1e-4);
    }
  EXPECT_LT(max_abs_diff(y, oracle::instance_norm(x)), 1e-12);
}

TEST(InstanceNorm, ConstantPlaneStaysFinite) {
  const Tensor4 y = instance_norm(Tensor4(1, 2, 4, 4, 3.0));
  for (double v : y.data()) EXPECT_EQ(v, 0.0);
}

TEST(MultiSpade, ZeroProducersReduceToNormalisation) {
  Rng rng(10);
  const MultiSpadeBlock block = MultiSpadeBlock::random(3, 3, 3, 4, rng).zeros_like();
  const Tensor4 feat = Tensor4::random_normal(1, 3, 4, 4, rng, 2.0);
  const Tensor4 guide = Tensor4::random_uniform(1, 3, 8, 8, rng, 0.0, 1.0);
  const Tensor4 source = Tensor4::random_uniform(1, 3, 4, 4, rng, 0.0, 1.0);
  const SpadeStage stage = block.guide;
  EXPECT_LT(max_abs_diff(spade_forward(stage, feat, guide), instance_norm(feat)), 1e-6);
  EXPECT_LT(max_abs_diff(multi_spade_forward(block, feat, guide, source),
                         instance_norm(instance_norm(feat))),
            1e-12);
}

TEST(MultiSpade, ConstantFeatureChannelStaysFinite) {
  Rng rng(11);
  const MultiSpadeBlock block = MultiSpadeBlock::random(2, 3, 3, 4, rng);
  Tensor4 feat = Tensor4::random_normal(1, 2, 4, 4, rng);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) feat(0, 1, i, j) = 0.25;
  const Tensor4 out = multi_spade_forward(block, feat, Tensor4(1, 3, 4, 4, 0.5), Tensor4(1, 3, 4, 4, 0.5));
  for (double v : out.data()) EXPECT_TRUE(std::isfinite(v));
}

TEST(MultiSpade, MatchesNaiveOracle) {
  Rng rng(12);
  const MultiSpadeBlock block = MultiSpadeBlock::random(2, 3, 3, 4, rng);
  const Tensor4 feat = Tensor4::random_normal(1, 2, 4, 4, rng);
  const Tensor4 guide = Tensor4::random_uniform(1, 3, 8, 8, rng, 0.0, 1.0);
  const Tensor4 source = Tensor4::random_uniform(1, 3, 4, 4, rng, 0.0, 1.0);
  const Tensor4 expect = oracle::spade_stage(oracle::spade_stage(feat, guide, block.guide.producer),
                                             source, block.source.producer);
  EXPECT_LT(max_abs_diff(multi_spade_forward(block, feat, guide, source), expect), 1e-10);
}

TEST(MultiSpade, IndivisibleConditionThrows) {
  Rng rng(13);
  const MultiSpadeBlock block = MultiSpadeBlock::random(2, 3, 3, 4, rng);
  EXPECT_THROW(multi_spade_forward(block, Tensor4(1, 2, 4, 4), Tensor4(1, 3, 6, 6), Tensor4(1, 3, 4, 4)),
               InputError);
}

// Losses ------------------------------------------------------------------------------------

TEST(GanLossTest, MatchesScalarOracle) {
  Rng rng(14);
  std::vector<Tensor4> real, fake;
  for (int k = 0; k < 3; ++k) {
    real.push_back(Tensor4::random_normal(1, 1, 4 >> k, 4 >> k, rng, 2.0));
    fake.push_back(Tensor4::random_normal(1, 1, 4 >> k, 4 >> k, rng, 2.0));
  }
  double ld = 0, lg = 0;
  for (int k = 0; k < 3; ++k) {
    double a = 0, b = 0, c = 0;
    for (double r : real[k].data()) a -= oracle::log_sigmoid(r);
    for (double f : fake[k].data()) b -= oracle::log_sigmoid(-f), c -= oracle::log_sigmoid(f);
    ld += a / real[k].size() + b / fake[k].size();
    lg += c / fake[k].size();
  }
  const GanLoss g = gan_loss(real, fake);
  EXPECT_NEAR(g.loss_d, ld, 1e-12);
  EXPECT_NEAR(g.loss_g, lg, 1e-12);
}

TEST(GanLossTest, HalfProbabilityPerScale) {
  std::vector<Tensor4> half(3, Tensor4(1, 1, 2, 2, 0.5));
  const GanLoss g = gan_loss_from_probabilities(half, half);
  EXPECT_NEAR(g.loss_d, 3 * -2.0 * std::log(0.5), 1e-12);
  EXPECT_NEAR(g.loss_g, 3 * -std::log(0.5), 1e-12);
  std::vector<Tensor4> zero_logit(3, Tensor4(1, 1, 2, 2, 0.0));
  EXPECT_NEAR(gan_loss(zero_logit, zero_logit).loss_d, g.loss_d, 1e-12);
}

TEST(GanLossTest, ConfidentDiscriminatorLimits) {
  const std::vector<Tensor4> real{Tensor4(1, 1, 2, 2, 40.0)};
  const std::vector<Tensor4> fake{Tensor4(1, 1, 2, 2, -40.0)};
  const GanLoss g = gan_loss(real, fake);
  EXPECT_LT(g.loss_d, 1e-15);
  EXPECT_NEAR(g.loss_g, 40.0, 1e-12);
  EXPECT_TRUE(std::isfinite(gan_loss(std::vector<Tensor4>{Tensor4(1, 1, 1, 1, 800.0)},
                                     std::vector<Tensor4>{Tensor4(1, 1, 1, 1, 800.0)})
                                .loss_d));
}

TEST(GanLossTest, ScaleCountMismatchThrows) {
  std::vector<Tensor4> one(1, Tensor4(1, 1, 1, 1));
  std::vector<Tensor4> two(2, Tensor4(1, 1, 1, 1));
  EXPECT_THROW(gan_loss(one, two), InputError);
}

TEST(FeatureMatching, TwoElementExample) {
  Tensor4 real(1, 1, 1, 2);
  Tensor4 fake(1, 1, 1, 2);
  fake(0, 0, 0, 0) = 0.2;
  fake(0, 0, 0, 1) = -0.4;
  std::vector<Tensor4> d;
  EXPECT_NEAR(feature_matching_loss(std::vector{real}, std::vector{fake}, &d), 0.3, 1e-15);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_DOUBLE_EQ(d[0](0, 0, 0, 0), 0.5);
  EXPECT_DOUBLE_EQ(d[0](0, 0, 0, 1), -0.5);
}

TEST(FeatureMatching, FiveLayerOracleAndSymmetry) {
  Rng rng(15);
  std::vector<Tensor4> real, fake;
  double expect = 0.0;
  for (int i = 0; i < 5; ++i) {
    real.push_back(Tensor4::random_normal(2, 3, 4, 4, rng));
    fake.push_back(Tensor4::random_normal(2, 3, 4, 4, rng));
    double s = 0;
    for (std::size_t j = 0; j < real[i].size(); ++j) s += std::abs(real[i].data()[j] - fake[i].data()[j]);
    expect += s / real[i].size();
  }
  EXPECT_NEAR(feature_matching_loss(real, fake), expect, 1e-12);
  EXPECT_DOUBLE_EQ(feature_matching_loss(real, fake), feature_matching_loss(fake, real));
  EXPECT_EQ(feature_matching_loss(real, real), 0.0);
}

TEST(Perceptual, IdentityExtractorIsMeanAbsoluteError) {
  Rng rng(16);
  const Tensor4 a = Tensor4::random_uniform(1, 3, 8, 8, rng, 0.0, 1.0);
  const Tensor4 b = Tensor4::random_uniform(1, 3, 8, 8, rng, 0.0, 1.0);
  double l1 = 0;
  for (std::size_t i = 0; i < a.size(); ++i) l1 += std::abs(a.data()[i] - b.data()[i]);
  EXPECT_NEAR(perceptual_loss(FeatureExtractor::identity(), a, b), l1 / a.size(), 1e-12);
}

TEST(Perceptual, SymmetricAndZeroOnEqualInputs) {
  Rng rng(17);
  const FeatureExtractor ext = FeatureExtractor::random(3, 4, 5);
  EXPECT_EQ(ext.layer_count(), 5u);
  const Tensor4 a = Tensor4::random_uniform(1, 3, 8, 8, rng, 0.0, 1.0);
  const Tensor4 b = Tensor4::random_uniform(1, 3, 8, 8, rng, 0.0, 1.0);
  EXPECT_DOUBLE_EQ(perceptual_loss(ext, a, b), perceptual_loss(ext, b, a));
  EXPECT_GT(perceptual_loss(ext, a, b), 0.0);
  EXPECT_EQ(perceptual_loss(ext, a, a), 0.0);
  const auto f = ext.features(a);
  ASSERT_EQ(f.size(), 5u);
  EXPECT_EQ(f[4].height(), 2);
}

TEST(Objective, WeightedSum) {
  EXPECT_DOUBLE_EQ(total_objective({1.0, 2.0, 3.0}, LossWeights{}), 51.0);
  EXPECT_DOUBLE_EQ(total_objective({1.0, 2.0, 3.0}, LossWeights{0.0, 0.0}), 1.0);
  EXPECT_EQ(LossWeights{}.lambda_fm, 10.0);
  EXPECT_EQ(LossWeights{}.lambda_percep, 10.0);
  EXPECT_THROW(LossWeights({-1.0, 1.0}).validate(), InputError);
}

// Demo training -----------------------------------------------------------------------------

TEST(DemoTraining, ShortRunReducesGuidedLoss) {
  DemoConfig cfg;
  cfg.steps = 40;
  const DemoResult r = run_demo_training(cfg);
  ASSERT_EQ(r.history.size(), 41u);
  EXPECT_LT(r.history.back().guided, r.history.front().guided);
  for (const auto& rec : r.history) {
    EXPECT_NEAR(rec.guided, 10 * rec.fm + 10 * rec.percep, 1e-9);
    EXPECT_NEAR(rec.objective, rec.gan_g + rec.guided, 1e-9);
  }
}

TEST(DemoTraining, DeterministicAndReferenceSwitch) {
  DemoConfig cfg;
  cfg.steps = 2;
  const DemoResult a = run_demo_training(cfg);
  const DemoResult b = run_demo_training(cfg);
  EXPECT_EQ(a.history.back().objective, b.history.back().objective);
  cfg.reference = PerceptualReference::kTarget;
  const DemoResult c = run_demo_training(cfg);
  EXPECT_NE(a.history.front().percep, c.history.front().percep);
  EXPECT_EQ(a.history.front().fm, c.history.front().fm);
}

TEST(DemoTraining, RejectsBadConfig) {
  DemoConfig cfg;
  cfg.size = 12;
  EXPECT_THROW(run_demo_training(cfg), InputError);
  cfg = DemoConfig{};
  cfg.steps = -1;
  EXPECT_THROW(run_demo_training(cfg), InputError);
}

}  // namespace
}  // namespace relit::nn
