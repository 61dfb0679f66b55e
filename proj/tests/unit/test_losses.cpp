#include <gtest/gtest.h>
#include <torch/torch.h>

#include <cmath>

#include "support/gradcheck.hpp"
#include "support/loss_oracles.hpp"
#include "udcnet/error.hpp"
#include "udcnet/losses.hpp"

namespace {

using namespace udcnet::testing::loss_oracle;

torch::Tensor checkerboard(int64_t n) {
  auto t = torch::zeros({1, 1, n, n}, torch::kFloat64);
  for (int64_t r = 0; r < n; ++r)
    for (int64_t c = 0; c < n; ++c) t[0][0][r][c] = double((r + c) % 2);
  return t;
}

udcnet::ModelOutput random_output(int64_t side, torch::Dtype dtype = torch::kFloat64) {
  udcnet::ModelOutput out;
  out.r6 = torch::randn({1, 1, side, side}, dtype);
  for (int level = 2; level <= 5; ++level) {
    out.sal_logits[level] = torch::randn({1, 1, side, side}, dtype);
    out.edge_logits[level] = torch::randn({1, 1, side, side}, dtype);
  }
  return out;
}

}  // namespace

TEST(BorderWeights, MatchBruteForceWindowMean) {
  torch::manual_seed(71);
  for (int trial = 0; trial < 10; ++trial) {
    auto gt = (torch::rand({1, 1, 9 + trial, 20 - trial}, torch::kFloat64) > 0.6).to(torch::kFloat64);
    auto w = udcnet::border_weights(gt, kWindow);
    auto ref = brute_weights(grid(gt), kWindow);
    auto got = grid(w);
    for (size_t r = 0; r < ref.size(); ++r)
      for (size_t c = 0; c < ref[0].size(); ++c) EXPECT_NEAR(got[r][c], ref[r][c], 1e-12);
  }
}

TEST(BorderWeights, ConstantMasksGiveUnitWeights) {
  for (double v : {0.0, 1.0}) {
    auto w = udcnet::border_weights(torch::full({2, 1, 12, 7}, v, torch::kFloat64));
    EXPECT_TRUE(torch::allclose(w, torch::ones_like(w), 0.0, 1e-12));
  }
  EXPECT_THROW(udcnet::border_weights(torch::zeros({1, 1, 4, 4}), 4), udcnet::Error);
}

TEST(WeightedBce, ConstantGtReducesToPlainBce) {
  auto logits = torch::randn({1, 1, 6, 6}, torch::kFloat64);
  for (double v : {0.0, 1.0}) {
    auto gt = torch::full({1, 1, 6, 6}, v, torch::kFloat64);
    auto plain = torch::binary_cross_entropy_with_logits(logits, gt);
    EXPECT_NEAR(udcnet::weighted_bce(logits, gt).item<double>(), plain.item<double>(), 1e-12);
  }
}

TEST(WeightedBce, SaturatedCorrectLogitsGiveZero) {
  auto gt = checkerboard(6);
  auto logits = (gt * 2.0 - 1.0) * 60.0;
  EXPECT_LT(udcnet::weighted_bce(logits, gt).item<double>(), 1e-20);
}

TEST(WeightedBce, CheckerboardWithZeroLogitsIsLn2) {
  auto gt = checkerboard(4);
  auto logits = torch::zeros_like(gt);
  EXPECT_NEAR(udcnet::weighted_bce(logits, gt).item<double>(), std::log(2.0), 1e-12);
  EXPECT_NEAR(brute_bce(logits, gt), std::log(2.0), 1e-12);
}

TEST(WeightedBce, MatchesBruteForceOnRandomMaps) {
  torch::manual_seed(73);
  for (int trial = 0; trial < 20; ++trial) {
    auto gt = (torch::rand({1, 1, 10, 10}, torch::kFloat64) > 0.5).to(torch::kFloat64);
    auto logits = torch::randn({1, 1, 10, 10}, torch::kFloat64) * 3.0;
    EXPECT_NEAR(udcnet::weighted_bce(logits, gt).item<double>(), brute_bce(logits, gt), 1e-10);
  }
}

TEST(WeightedIou, ClosedFormForEmptyPrediction) {
  const int64_t n = 5;
  auto gt = torch::ones({1, 1, n, n}, torch::kFloat64);
  auto logits = torch::full({1, 1, n, n}, -800.0, torch::kFloat64);
  // w = 1 on a constant mask, so sum w = n^2.
  EXPECT_NEAR(udcnet::weighted_iou(logits, gt).item<double>(), 1.0 - 1.0 / (n * n + 1.0), 1e-12);
}

TEST(WeightedIou, PerfectPredictionNearZero) {
  auto gt = checkerboard(8);
  EXPECT_LT(udcnet::weighted_iou((gt * 2.0 - 1.0) * 60.0, gt).item<double>(), 1e-3);
}

TEST(WeightedIou, RangeSweepAndBruteForce) {
  torch::manual_seed(79);
  for (int trial = 0; trial < 50; ++trial) {
    auto gt = (torch::rand({1, 1, 8, 8}, torch::kFloat64) > 0.3 + 0.01 * trial).to(torch::kFloat64);
    auto logits = torch::randn({1, 1, 8, 8}, torch::kFloat64) * (0.5 + trial);
    const double v = udcnet::weighted_iou(logits, gt).item<double>();
    EXPECT_GE(v, 0.0);
    EXPECT_LT(v, 1.0);
    EXPECT_NEAR(v, brute_iou(logits, gt), 1e-10);
  }
}

TEST(DiceEdge, HalfOverlapIsFourNinths) {
  auto p = torch::zeros({1, 1, 4, 4}, torch::kFloat64);
  auto g = torch::zeros({1, 1, 4, 4}, torch::kFloat64);
  // |p| = |g| = 4, |p and g| = 2.
  for (int c = 0; c < 4; ++c) p[0][0][0][c] = 1.0;
  g[0][0][0][0] = g[0][0][0][1] = g[0][0][1][0] = g[0][0][1][1] = 1.0;
  auto logits = (p * 2.0 - 1.0) * 800.0;
  EXPECT_NEAR(udcnet::dice_edge(logits, g).item<double>(), 4.0 / 9.0, 1e-12);
}

TEST(DiceEdge, DegenerateAndPerfectCases) {
  auto g = torch::zeros({1, 1, 6, 6}, torch::kFloat64);
  EXPECT_NEAR(udcnet::dice_edge(torch::full_like(g, -800.0), g).item<double>(), 0.0, 1e-12);
  auto edges = checkerboard(6);
  EXPECT_LT(udcnet::dice_edge((edges * 2.0 - 1.0) * 60.0, edges).item<double>(), 1e-3);
}

TEST(DiceEdge, MatchesBruteForce) {
  torch::manual_seed(83);
  for (int trial = 0; trial < 20; ++trial) {
    auto g = (torch::rand({1, 1, 7, 9}, torch::kFloat64) > 0.8).to(torch::kFloat64);
    auto logits = torch::randn({1, 1, 7, 9}, torch::kFloat64) * 2.0;
    EXPECT_NEAR(udcnet::dice_edge(logits, g).item<double>(), brute_dice(logits, g), 1e-12);
  }
}

TEST(Losses, BatchIsMeanOfPerImageLosses) {
  torch::manual_seed(89);
  auto gt = (torch::rand({3, 1, 8, 8}, torch::kFloat64) > 0.5).to(torch::kFloat64);
  auto logits = torch::randn({3, 1, 8, 8}, torch::kFloat64);
  double bce = 0.0, iou = 0.0, dice = 0.0;
  for (int64_t b = 0; b < 3; ++b) {
    auto l = logits.narrow(0, b, 1), g = gt.narrow(0, b, 1);
    bce += brute_bce(l, g) / 3.0;
    iou += brute_iou(l, g) / 3.0;
    dice += brute_dice(l, g) / 3.0;
  }
  EXPECT_NEAR(udcnet::weighted_bce(logits, gt).item<double>(), bce, 1e-10);
  EXPECT_NEAR(udcnet::weighted_iou(logits, gt).item<double>(), iou, 1e-10);
  EXPECT_NEAR(udcnet::dice_edge(logits, gt).item<double>(), dice, 1e-10);
}

TEST(Losses, RejectOutOfRangeTargetsAndShapeMismatch) {
  auto logits = torch::zeros({1, 1, 4, 4});
  try {
    udcnet::weighted_bce(logits, torch::full({1, 1, 4, 4}, 1.5));
    FAIL();
  } catch (const udcnet::Error& e) {
    EXPECT_EQ(e.code(), "invalid_input");
  }
  EXPECT_THROW(udcnet::weighted_iou(logits, torch::full({1, 1, 4, 4}, -0.1)), udcnet::Error);
  EXPECT_THROW(udcnet::dice_edge(logits, torch::zeros({2, 1, 4, 4})), udcnet::Error);
}

TEST(Losses, LogitsAreResizedToGroundTruth) {
  torch::manual_seed(97);
  auto small = torch::randn({1, 1, 4, 4}, torch::kFloat64);
  auto gt = (torch::rand({1, 1, 16, 16}, torch::kFloat64) > 0.5).to(torch::kFloat64);
  auto up = torch::nn::functional::interpolate(
      small, torch::nn::functional::InterpolateFuncOptions()
                 .size(std::vector<int64_t>{16, 16})
                 .mode(torch::kBilinear)
                 .align_corners(false));
  EXPECT_NEAR(udcnet::weighted_bce(small, gt).item<double>(), brute_bce(up, gt), 1e-10);
}

TEST(LevelWeights, SequenceMatchesTheRecipe) {
  const std::array<double, 4> sal{1.0, 0.5, 0.25, 0.125};
  const std::array<double, 4> edge{0.5, 0.25, 0.125, 0.0625};
  for (int level = 2; level <= 5; ++level) {
    EXPECT_EQ(udcnet::saliency_level_weight(level), sal[level - 2]);
    EXPECT_EQ(udcnet::edge_level_weight(level), edge[level - 2]);
  }
  EXPECT_EQ(udcnet::kR6Weight, 0.0625);
}

TEST(TotalLoss, EqualsIndependentResummation) {
  torch::manual_seed(101);
  for (int trial = 0; trial < 5; ++trial) {
    auto out = random_output(8);
    auto gt = (torch::rand({1, 1, 8, 8}, torch::kFloat64) > 0.5).to(torch::kFloat64);
    auto edges = (torch::rand({1, 1, 8, 8}, torch::kFloat64) > 0.8).to(torch::kFloat64);
    auto b = udcnet::total_loss(out, gt, edges);
    double expected = (brute_bce(out.r6, gt) + brute_iou(out.r6, gt)) / 16.0;
    const std::array<double, 4> sal{1.0, 1.0 / 2, 1.0 / 4, 1.0 / 8};
    const std::array<double, 4> edge{1.0 / 2, 1.0 / 4, 1.0 / 8, 1.0 / 16};
    for (int level = 2; level <= 5; ++level) {
      expected += sal[level - 2] * (brute_bce(out.sal_logits[level], gt) + brute_iou(out.sal_logits[level], gt));
      expected += edge[level - 2] * brute_dice(out.edge_logits[level], edges);
    }
    EXPECT_NEAR(b.total.item<double>(), expected, 1e-6);
    double resum = (b.r6_bce + b.r6_iou).item<double>() / 16.0;
    for (int level = 2; level <= 5; ++level) {
      resum += sal[level - 2] * (b.bce[level] + b.iou[level]).item<double>() +
               edge[level - 2] * b.dice[level].item<double>();
    }
    EXPECT_NEAR(b.total.item<double>(), resum, 1e-6);
    EXPECT_GE(b.total.item<double>(), 0.0);
  }
}

TEST(TotalLoss, SaturatedPerfectOutputsAreNearZero) {
  auto gt = torch::zeros({1, 1, 16, 16}, torch::kFloat64);
  gt.narrow(2, 4, 8).narrow(3, 4, 8).fill_(1.0);
  auto edges = torch::zeros_like(gt);
  edges.narrow(2, 4, 8).narrow(3, 4, 8).fill_(1.0);
  edges.narrow(2, 6, 4).narrow(3, 6, 4).fill_(0.0);
  udcnet::ModelOutput out;
  out.r6 = (gt * 2.0 - 1.0) * 60.0;
  for (int level = 2; level <= 5; ++level) {
    out.sal_logits[level] = (gt * 2.0 - 1.0) * 60.0;
    out.edge_logits[level] = (edges * 2.0 - 1.0) * 60.0;
  }
  EXPECT_LT(udcnet::total_loss(out, gt, edges).total.item<double>(), 1e-2);
}

TEST(TotalLoss, GradientMatchesFiniteDifferences) {
  torch::manual_seed(103);
  auto out = random_output(4);
  std::vector<std::pair<std::string, torch::Tensor>> inputs;
  out.r6.requires_grad_(true);
  inputs.emplace_back("r6", out.r6);
  for (int level = 2; level <= 5; ++level) {
    out.sal_logits[level].requires_grad_(true);
    out.edge_logits[level].requires_grad_(true);
    inputs.emplace_back("sal" + std::to_string(level), out.sal_logits[level]);
    inputs.emplace_back("edge" + std::to_string(level), out.edge_logits[level]);
  }
  auto gt = (torch::rand({1, 1, 4, 4}, torch::kFloat64) > 0.5).to(torch::kFloat64);
  auto edges = (torch::rand({1, 1, 4, 4}, torch::kFloat64) > 0.7).to(torch::kFloat64);
  auto r = udcnet::testing::gradcheck(inputs, [&] { return udcnet::total_loss(out, gt, edges).total; });
  EXPECT_EQ(r.checked, 9 * 16);
  EXPECT_LT(r.max_rel_error, 1e-3) << r.worst;
}
