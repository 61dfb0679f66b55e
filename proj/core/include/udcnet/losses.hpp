#pragma once

#include <torch/torch.h>

#include <map>

#include "udcnet/model.hpp"

namespace udcnet {

struct LossConfig {
  /// Side of the box filter that defines the border-emphasis weights.
  int64_t window = 15;
  double dice_eps = 1.0;
};

/// w = 1 + 5 * |boxfilter(gt) - gt|. The box filter averages over the
/// in-bounds part of the window, so a constant mask gives w = 1 everywhere.
torch::Tensor border_weights(const torch::Tensor& gt, int64_t window = 15);

/// Per-image weighted binary cross-entropy, averaged over the batch.
/// Logits are bilinearly resized to the ground-truth size first. Throws
/// Error("invalid_input") when gt leaves [0, 1].
torch::Tensor weighted_bce(const torch::Tensor& logits, const torch::Tensor& gt,
                           int64_t window = 15);

/// 1 - (sum w*p*g + 1) / (sum w*(p + g - p*g) + 1), per image, batch mean.
torch::Tensor weighted_iou(const torch::Tensor& logits, const torch::Tensor& gt,
                           int64_t window = 15);

/// 1 - (2 sum p*g + eps) / (sum p + sum g + eps), per image, batch mean.
torch::Tensor dice_edge(const torch::Tensor& logits, const torch::Tensor& edge_gt,
                        double eps = 1.0);

struct LossBreakdown {
  torch::Tensor r6_bce;
  torch::Tensor r6_iou;
  std::map<int, torch::Tensor> bce;   // levels 2..5
  std::map<int, torch::Tensor> iou;   // levels 2..5
  std::map<int, torch::Tensor> dice;  // levels 2..5
  torch::Tensor total;
};

/// Weight of the saliency terms at `level` (1 at level 2, halving upward).
double saliency_level_weight(int level);
/// Weight of the edge term at `level` (1/2 at level 2, halving upward).
double edge_level_weight(int level);
/// Weight of the R6 term.
constexpr double kR6Weight = 1.0 / 16.0;

LossBreakdown total_loss(const ModelOutput& output, const torch::Tensor& gt,
                         const torch::Tensor& edge_gt, const LossConfig& config = {});

}  // namespace udcnet
