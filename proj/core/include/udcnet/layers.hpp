#pragma once

#include <torch/torch.h>

#include <cstdint>

namespace udcnet {

/// Accumulates multiply-accumulate counts reported by ConvUnit, Linear
/// layers and attention matmuls while alive on the current thread. Counts
/// are per sample (divided by the batch size), matching the usual
/// "FLOPs" figure quoted for saliency models.
class MacCounter {
 public:
  MacCounter();
  ~MacCounter();
  MacCounter(const MacCounter&) = delete;
  MacCounter& operator=(const MacCounter&) = delete;

  int64_t total() const { return total_; }

  /// No-op unless a counter is active on this thread.
  static void add(int64_t macs_per_sample);

 private:
  int64_t total_ = 0;
  MacCounter* previous_ = nullptr;
};

struct ConvSpec {
  int64_t in = 0;
  int64_t out = 0;
  int64_t kernel = 1;
  int64_t stride = 1;
  int64_t dilation = 1;
  int64_t groups = 1;
  bool bias = true;
  bool batch_norm = false;
  bool relu = false;
};

/// Convolution with optional BatchNorm and ReLU. Padding keeps the spatial
/// size for stride 1 ("same" padding = dilation * (kernel - 1) / 2).
class ConvUnitImpl : public torch::nn::Module {
 public:
  explicit ConvUnitImpl(const ConvSpec& spec);
  torch::Tensor forward(const torch::Tensor& x);

  const ConvSpec& spec() const { return spec_; }

 private:
  ConvSpec spec_;
  torch::nn::Conv2d conv_{nullptr};
  torch::nn::BatchNorm2d bn_{nullptr};
};
TORCH_MODULE(ConvUnit);

ConvUnit pointwise(int64_t in, int64_t out);
ConvUnit conv_bn_relu(int64_t in, int64_t out, int64_t kernel, int64_t dilation = 1);
ConvUnit depthwise(int64_t channels, int64_t kernel, int64_t dilation = 1);

/// Linear layer that reports its MACs to an active MacCounter.
class CountedLinearImpl : public torch::nn::Module {
 public:
  CountedLinearImpl(int64_t in, int64_t out, bool bias = true);
  torch::Tensor forward(const torch::Tensor& x);

  torch::nn::Linear linear{nullptr};
};
TORCH_MODULE(CountedLinear);

/// Runs a plain torch convolution and reports its MACs. Used by encoders
/// whose parameter names must match external weight files.
torch::Tensor counted_conv(torch::nn::Conv2d& conv, const torch::Tensor& x);

/// Matrix product that reports m*k*n MACs per batch element.
torch::Tensor counted_matmul(const torch::Tensor& a, const torch::Tensor& b, int64_t batch);

/// Layer normalization over the channel axis at every pixel of [B,C,H,W].
class LayerNorm2dImpl : public torch::nn::Module {
 public:
  explicit LayerNorm2dImpl(int64_t channels, double eps = 1e-5);
  torch::Tensor forward(const torch::Tensor& x);

  torch::Tensor weight;
  torch::Tensor bias;

 private:
  double eps_;
};
TORCH_MODULE(LayerNorm2d);

/// Channel-pooled (mean, max) descriptor -> 7x7 conv -> sigmoid. Returns
/// the [B,1,H,W] gate.
class SpatialGateImpl : public torch::nn::Module {
 public:
  SpatialGateImpl();
  torch::Tensor forward(const torch::Tensor& x);

 private:
  ConvUnit conv_{nullptr};
};
TORCH_MODULE(SpatialGate);

/// Shared MLP over global average- and max-pooled descriptors -> sigmoid.
/// Returns the [B,C,1,1] gate.
class ChannelGateImpl : public torch::nn::Module {
 public:
  explicit ChannelGateImpl(int64_t channels, int64_t reduction = 16);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  CountedLinear fc1_{nullptr};
  CountedLinear fc2_{nullptr};
};
TORCH_MODULE(ChannelGate);

/// Residual channel-then-spatial attention: x + SA(CA(x) * x) * (CA(x) * x).
class ResidualCbamImpl : public torch::nn::Module {
 public:
  explicit ResidualCbamImpl(int64_t channels);
  torch::Tensor forward(const torch::Tensor& x);

  /// Gates of the most recent forward call (for inspection in tests).
  torch::Tensor last_channel_gate;
  torch::Tensor last_spatial_gate;

 private:
  ChannelGate channel_{nullptr};
  SpatialGate spatial_{nullptr};
};
TORCH_MODULE(ResidualCbam);

/// Bilinear resize (align_corners = false). Returns `x` untouched when the
/// size already matches.
torch::Tensor resize_bilinear(const torch::Tensor& x, int64_t height, int64_t width);

/// Reverse attention 1 - sigmoid(x).
torch::Tensor reverse_attention(const torch::Tensor& x);

}  // namespace udcnet
