#pragma once

#include <torch/torch.h>

#include <array>
#include <map>
#include <memory>
#include <optional>
#include <vector>

#include "udcnet/backbone.hpp"
#include "udcnet/djo.hpp"
#include "udcnet/dse.hpp"
#include "udcnet/fsdt.hpp"
#include "udcnet/layers.hpp"

namespace udcnet {

struct UdcNetConfig {
  BackboneConfig backbone;
  /// Decoder width shared by FSDT, DSE and DJO. Overrides the per-module
  /// `channels` fields.
  int64_t channels = 128;
  /// Input side length; fixes the DJO spectral filter grids.
  int64_t image_size = 352;
  /// Ablation switches. With FSDT off each level is a 1x1 lateral reduction
  /// plus the upsampled level above; with DSE off R6 is a 1x1 conv of the
  /// level-5 features; with DJO off every level gets plain conv heads.
  bool use_fsdt = true;
  bool use_dse = true;
  bool use_djo = true;
  FsdtConfig fsdt;
  DseConfig dse;
  DjoConfig djo;

  void validate() const;
};

struct ModelOutput {
  std::map<int, torch::Tensor> sal_logits;   // levels 2..5
  std::map<int, torch::Tensor> edge_logits;  // levels 2..5
  torch::Tensor r6;

  /// Sigmoid of the level-2 saliency logits resized to height x width.
  torch::Tensor prediction(int64_t height, int64_t width) const;
  /// Same for the level-2 edge logits.
  torch::Tensor edge_prediction(int64_t height, int64_t width) const;
};

/// Plain decoder head used when DJO is switched off.
class PlainHeadImpl : public torch::nn::Module {
 public:
  explicit PlainHeadImpl(int64_t channels);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  ConvUnit hidden_{nullptr};
  ConvUnit out_{nullptr};
};
TORCH_MODULE(PlainHead);

class UdcNetImpl : public torch::nn::Module {
 public:
  explicit UdcNetImpl(const UdcNetConfig& config);

  ModelOutput forward(const torch::Tensor& image);

  const UdcNetConfig& config() const { return config_; }
  Backbone& backbone() { return *backbone_; }

 private:
  torch::Tensor decode_level(int level, const torch::Tensor& origin,
                             const std::optional<torch::Tensor>& next);

  UdcNetConfig config_;
  std::shared_ptr<Backbone> backbone_;
  std::array<FsdtBlock, 4> fsdt_{nullptr, nullptr, nullptr, nullptr};
  std::array<ConvUnit, 4> lateral_{nullptr, nullptr, nullptr, nullptr};
  DenseSemanticExcavation dse_{nullptr};
  ConvUnit r6_head_{nullptr};
  std::array<DjoLevel, 4> djo_{nullptr, nullptr, nullptr, nullptr};
  std::array<PlainHead, 4> sal_heads_{nullptr, nullptr, nullptr, nullptr};
  std::array<PlainHead, 4> edge_heads_{nullptr, nullptr, nullptr, nullptr};
};
TORCH_MODULE(UdcNet);

/// Guidance maps consumed by DJO level `level`, nearest level first: R6 at
/// level 5, then up to three higher saliency maps bounded by level 5.
std::vector<int> guidance_levels(int level);

struct Capacity {
  int64_t params = 0;
  /// Multiply-accumulates for one image of config.image_size.
  int64_t macs = 0;
};

/// Builds the model from `config` (weights are not loaded) and measures
/// its size and per-image MACs at config.image_size.
Capacity count_params_flops(UdcNetConfig config);

int64_t count_parameters(torch::nn::Module& module);

}  // namespace udcnet
