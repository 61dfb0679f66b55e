#pragma once

#include <torch/torch.h>

#include <optional>
#include <string_view>
#include <vector>

#include "udcnet/frequency_ops.hpp"
#include "udcnet/layers.hpp"

namespace udcnet {

/// Global branch of the cross-domain FFN.
///  kLiteral:         |IFFT(FFT(GELU(S) * S))| with S = |FFT(x)|. Collapses to
///                    GELU(S) * S because the inner round trip is the identity.
///  kPhasePreserving: GELU(S) * S recombined with the phase of FFT(x), then
///                    the real part of the inverse transform.
enum class CdffnGlobalMode { kLiteral, kPhasePreserving };

CdffnGlobalMode parse_cdffn_global_mode(std::string_view name);
std::string_view to_string(CdffnGlobalMode mode);

struct FsdtConfig {
  int64_t channels = 128;
  std::vector<int64_t> dw_kernels{3, 5, 7};
  std::vector<int64_t> le_dilations{1, 2, 3};
  CdffnGlobalMode cdffn_global_mode = CdffnGlobalMode::kPhasePreserving;
  freq::ComplexSoftmax complex_softmax = freq::ComplexSoftmax::kSplit;
  int64_t heads = 1;
  /// Hidden width of the cross-domain FFN relative to `channels`.
  double ffn_expansion = 2.66;

  /// Throws Error("invalid_config") on a violated invariant.
  void validate() const;
  int64_t ffn_hidden() const;
};

/// Concatenates F_o with the x2-upsampled higher-level output (when given),
/// reduces to `channels` with a 1x1 conv and layer-normalizes.
class FuseInputsImpl : public torch::nn::Module {
 public:
  FuseInputsImpl(int64_t in_channels, int64_t next_channels, int64_t channels);
  torch::Tensor forward(const torch::Tensor& origin, const std::optional<torch::Tensor>& next);

 private:
  int64_t next_channels_;
  ConvUnit reduce_{nullptr};
  LayerNorm2d norm_{nullptr};
};
TORCH_MODULE(FuseInputs);

/// Spatial perception self-attention: multi-kernel depthwise Q/K/V and
/// channel-transposed (C x C) attention.
class SpatialSelfAttentionImpl : public torch::nn::Module {
 public:
  explicit SpatialSelfAttentionImpl(const FsdtConfig& config);
  torch::Tensor forward(const torch::Tensor& x);

  /// [B, heads, C/heads, C/heads] softmax map of the last forward call.
  torch::Tensor last_attention;
  torch::Tensor temperature;

 private:
  torch::Tensor project(size_t which, const torch::Tensor& x);

  int64_t heads_;
  std::vector<ConvUnit> pointwise_;
  std::vector<std::vector<ConvUnit>> depthwise_;
  ConvUnit out_{nullptr};
};
TORCH_MODULE(SpatialSelfAttention);

/// Frequency perception self-attention: Q/K/V are spectra of point-wise
/// projections, attention is complex and channel-transposed, the output is
/// the modulus of the inverse transform followed by a 1x1 conv.
class FrequencySelfAttentionImpl : public torch::nn::Module {
 public:
  explicit FrequencySelfAttentionImpl(const FsdtConfig& config);
  torch::Tensor forward(const torch::Tensor& x);

  freq::ComplexSpectrum last_attention;
  torch::Tensor temperature;

 private:
  int64_t heads_;
  freq::ComplexSoftmax policy_;
  std::vector<ConvUnit> pointwise_;
  ConvUnit out_{nullptr};
};
TORCH_MODULE(FrequencySelfAttention);

/// Adaptive fusion: concat(a, b, a+b, a*b) -> 1x1 -> 3x3 -> 3x3 (4C->3C->2C->C)
/// followed by residual channel-spatial attention.
class AdaptiveFusionImpl : public torch::nn::Module {
 public:
  explicit AdaptiveFusionImpl(int64_t channels);
  torch::Tensor forward(const torch::Tensor& a, const torch::Tensor& b);

  ResidualCbam attention{nullptr};

 private:
  int64_t channels_;
  torch::nn::Sequential reduce_{nullptr};
};
TORCH_MODULE(AdaptiveFusion);

/// Cross-domain feed-forward network with a local (gated depthwise +
/// atrous local enhancement) and a global (spectral gating) branch.
class CrossDomainFfnImpl : public torch::nn::Module {
 public:
  explicit CrossDomainFfnImpl(const FsdtConfig& config);
  torch::Tensor forward(const torch::Tensor& x);

  torch::Tensor local_branch(const torch::Tensor& in3);
  torch::Tensor global_branch(const torch::Tensor& in3) const;

  LayerNorm2d norm{nullptr};
  ConvUnit project_in{nullptr};

 private:
  CdffnGlobalMode mode_;
  ConvUnit gate_{nullptr};
  ConvUnit value_{nullptr};
  std::vector<ConvUnit> enhance_;
  ConvUnit enhance_proj_{nullptr};
  ConvUnit out_{nullptr};
};
TORCH_MODULE(CrossDomainFfn);

/// One frequency-spatial transformer block for a pyramid level.
class FsdtBlockImpl : public torch::nn::Module {
 public:
  /// `has_next` is false only for the topmost level, which receives no
  /// higher-level block output.
  FsdtBlockImpl(int64_t in_channels, bool has_next, const FsdtConfig& config);
  torch::Tensor forward(const torch::Tensor& origin,
                        const std::optional<torch::Tensor>& next = std::nullopt);

  bool has_next() const { return has_next_; }

  FuseInputs fuse{nullptr};
  SpatialSelfAttention spsa{nullptr};
  FrequencySelfAttention fpsa{nullptr};
  AdaptiveFusion afs{nullptr};
  CrossDomainFfn cdffn{nullptr};

 private:
  bool has_next_;
  ConvUnit in2_proj_{nullptr};
  ConvUnit origin_conv_{nullptr};
  ConvUnit out_proj_{nullptr};
  ConvUnit residual_proj_{nullptr};
};
TORCH_MODULE(FsdtBlock);

}  // namespace udcnet
