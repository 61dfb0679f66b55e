#pragma once

#include <torch/torch.h>

#include <array>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "udcnet/layers.hpp"

namespace udcnet {

namespace detail {
class PvtPatchEmbed;
class PvtBlock;
}  // namespace detail

/// Encoder features at strides 4, 8, 16 and 32. The stride-2 level is not
/// exposed.
struct FeaturePyramid {
  torch::Tensor f2;
  torch::Tensor f3;
  torch::Tensor f4;
  torch::Tensor f5;

  /// Level index 2..5.
  const torch::Tensor& level(int i) const;
};

enum class BackboneKind { kToy, kResNet50, kPvtV2B2 };

BackboneKind parse_backbone_kind(std::string_view name);
std::string_view to_string(BackboneKind kind);

struct BackboneConfig {
  BackboneKind kind = BackboneKind::kResNet50;
  /// Local weight file written by torch.save(dict(state_dict)). Empty keeps the
  /// random initialisation. Never downloaded.
  std::string weights;
  /// Output channels of levels 2..5 for the toy encoder.
  std::array<int64_t, 4> toy_channels{16, 32, 64, 128};
};

class Backbone : public torch::nn::Module {
 public:
  /// Throws Error("invalid_input") unless H and W are divisible by 32.
  FeaturePyramid forward(const torch::Tensor& image);

  /// Channels of levels 2..5.
  virtual std::array<int64_t, 4> channels() const = 0;

  /// Copies tensors from a state_dict file into this module. Keys of the
  /// classification head are ignored; any missing or mis-shaped tensor
  /// raises Error("weights").
  void load_weights(const std::string& path);

 protected:
  virtual FeaturePyramid extract(const torch::Tensor& image) = 0;
  virtual bool ignored_key(const std::string& key) const = 0;
};

/// Five stride-2 conv-BN-ReLU stages.
class ToyBackbone : public Backbone {
 public:
  explicit ToyBackbone(const std::array<int64_t, 4>& channels);
  std::array<int64_t, 4> channels() const override { return channels_; }

 protected:
  FeaturePyramid extract(const torch::Tensor& image) override;
  bool ignored_key(const std::string&) const override { return false; }

 private:
  std::array<int64_t, 4> channels_;
  std::vector<ConvUnit> stages_;
};

/// ResNet-50 with torchvision parameter names.
class ResNet50Backbone : public Backbone {
 public:
  ResNet50Backbone();
  std::array<int64_t, 4> channels() const override { return {256, 512, 1024, 2048}; }

 protected:
  FeaturePyramid extract(const torch::Tensor& image) override;
  bool ignored_key(const std::string& key) const override;

 private:
  torch::nn::Conv2d conv1_{nullptr};
  torch::nn::BatchNorm2d bn1_{nullptr};
  std::array<torch::nn::Sequential, 4> layers_;
};

/// PVTv2-b2 with the parameter names of the reference release.
class PvtV2B2Backbone : public Backbone {
 public:
  PvtV2B2Backbone();
  std::array<int64_t, 4> channels() const override { return {64, 128, 320, 512}; }

 protected:
  FeaturePyramid extract(const torch::Tensor& image) override;
  bool ignored_key(const std::string& key) const override;

 private:
  struct Stage {
    std::shared_ptr<detail::PvtPatchEmbed> embed;
    std::vector<std::shared_ptr<detail::PvtBlock>> blocks;
    torch::nn::LayerNorm norm{nullptr};
  };
  std::vector<Stage> stages_;
};

std::shared_ptr<Backbone> make_backbone(const BackboneConfig& config);

}  // namespace udcnet
