#include "udcnet/losses.hpp"

#include <fmt/format.h>
#include <fmt/ranges.h>

#include <cmath>

#include "udcnet/error.hpp"
#include "udcnet/layers.hpp"

namespace udcnet {

namespace F = torch::nn::functional;

namespace {

void check_target(const torch::Tensor& logits, const torch::Tensor& gt, const char* what) {
  if (gt.dim() != 4 || logits.dim() != 4 || gt.size(0) != logits.size(0) ||
      gt.size(1) != logits.size(1)) {
    throw Error("shape_mismatch", fmt::format("{}: logits {} vs target {}", what,
                                              logits.sizes(), gt.sizes()));
  }
  if (gt.numel() > 0 && (gt.min().item<double>() < 0.0 || gt.max().item<double>() > 1.0)) {
    throw Error("invalid_input", fmt::format("{}: target values must lie in [0, 1]", what));
  }
}

torch::Tensor to_target_size(const torch::Tensor& logits, const torch::Tensor& gt) {
  return resize_bilinear(logits, gt.size(2), gt.size(3));
}

}  // namespace

torch::Tensor border_weights(const torch::Tensor& gt, int64_t window) {
  if (window < 1 || window % 2 == 0) {
    throw Error("invalid_config", fmt::format("loss window {} must be odd and positive", window));
  }
  auto local = F::avg_pool2d(gt, F::AvgPool2dFuncOptions(window).stride(1).padding(window / 2)
                                     .count_include_pad(false));
  return 1.0 + 5.0 * (local - gt).abs();
}

torch::Tensor weighted_bce(const torch::Tensor& logits, const torch::Tensor& gt, int64_t window) {
  check_target(logits, gt, "weighted_bce");
  auto x = to_target_size(logits, gt);
  auto w = border_weights(gt, window);
  auto bce = F::binary_cross_entropy_with_logits(
      x, gt, F::BinaryCrossEntropyWithLogitsFuncOptions().reduction(torch::kNone));
  return ((w * bce).sum({2, 3}) / w.sum({2, 3})).mean();
}

torch::Tensor weighted_iou(const torch::Tensor& logits, const torch::Tensor& gt, int64_t window) {
  check_target(logits, gt, "weighted_iou");
  auto p = torch::sigmoid(to_target_size(logits, gt));
  auto w = border_weights(gt, window);
  auto inter = (w * p * gt).sum({2, 3});
  auto uni = (w * (p + gt - p * gt)).sum({2, 3});
  return (1.0 - (inter + 1.0) / (uni + 1.0)).mean();
}

torch::Tensor dice_edge(const torch::Tensor& logits, const torch::Tensor& edge_gt, double eps) {
  check_target(logits, edge_gt, "dice_edge");
  auto p = torch::sigmoid(to_target_size(logits, edge_gt));
  auto inter = (p * edge_gt).sum({1, 2, 3});
  auto denom = p.sum({1, 2, 3}) + edge_gt.sum({1, 2, 3});
  return (1.0 - (2.0 * inter + eps) / (denom + eps)).mean();
}

double saliency_level_weight(int level) { return std::ldexp(1.0, -(level - 2)); }

double edge_level_weight(int level) { return std::ldexp(1.0, -(level - 1)); }

LossBreakdown total_loss(const ModelOutput& output, const torch::Tensor& gt,
                         const torch::Tensor& edge_gt, const LossConfig& config) {
  LossBreakdown out;
  out.r6_bce = weighted_bce(output.r6, gt, config.window);
  out.r6_iou = weighted_iou(output.r6, gt, config.window);
  auto total = kR6Weight * (out.r6_bce + out.r6_iou);
  for (int level = 2; level <= 5; ++level) {
    out.bce[level] = weighted_bce(output.sal_logits.at(level), gt, config.window);
    out.iou[level] = weighted_iou(output.sal_logits.at(level), gt, config.window);
    out.dice[level] = dice_edge(output.edge_logits.at(level), edge_gt, config.dice_eps);
    total = total + saliency_level_weight(level) * (out.bce[level] + out.iou[level]) +
            edge_level_weight(level) * out.dice[level];
  }
  out.total = total;
  return out;
}

}  // namespace udcnet
