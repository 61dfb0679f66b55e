#pragma once

#include <torch/torch.h>

#include <vector>

#include "udcnet/layers.hpp"

namespace udcnet {

struct DseConfig {
  std::vector<int64_t> dilations{3, 6, 12, 18};
  int64_t channels = 128;

  /// Dilations must be positive and strictly increasing.
  void validate() const;
};

/// Dense semantic excavation over the top pyramid level. Produces the
/// one-channel coarse logit map R6.
///
/// Branches: a 1x1 conv, one 3x3 atrous conv per dilation (each fed with
/// the reduced input plus the sum of every earlier branch output), and a
/// pooled (avg + max) descriptor branch. Their concatenation is reduced by
/// three 3x3 convs, added to a 3x3 projection of concat(F5_o, F5_h), and
/// mapped to one channel by two 1x1 convs.
class DenseSemanticExcavationImpl : public torch::nn::Module {
 public:
  DenseSemanticExcavationImpl(int64_t origin_channels, const DseConfig& config);

  torch::Tensor forward(const torch::Tensor& origin, const torch::Tensor& enhanced);

  int64_t branch_count() const { return static_cast<int64_t>(atrous_.size()) + 2; }

  /// Concatenated branch tensor of the last forward call.
  torch::Tensor last_concat;

 private:
  ConvUnit reduce_{nullptr};
  ConvUnit point_{nullptr};
  std::vector<ConvUnit> atrous_;
  ConvUnit pooled_{nullptr};
  torch::nn::Sequential merge_{nullptr};
  ConvUnit skip_{nullptr};
  ConvUnit head_hidden_{nullptr};
  ConvUnit head_out_{nullptr};
};
TORCH_MODULE(DenseSemanticExcavation);

}  // namespace udcnet
