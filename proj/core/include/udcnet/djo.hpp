#pragma once

#include <torch/torch.h>

#include <string_view>
#include <vector>

#include "udcnet/fsdt.hpp"
#include "udcnet/layers.hpp"

namespace udcnet {

/// Frequency path of the saliency branch.
///  kSpectralFilter: Re(IFFT(W * FFT(x))) with a learnable per-channel,
///                   per-frequency complex filter W initialised to 1 + 0i.
///  kLiteral:        |IFFT(FFT(x))|, which equals |x|.
enum class FreqPathMode { kSpectralFilter, kLiteral };

FreqPathMode parse_freq_path_mode(std::string_view name);
std::string_view to_string(FreqPathMode mode);

struct DjoConfig {
  int64_t channels = 128;
  FreqPathMode freq_path = FreqPathMode::kSpectralFilter;
};

struct DjoLevelOutputs {
  torch::Tensor sal_logits;   // [B,1,H,W]
  torch::Tensor edge_logits;  // [B,1,H,W]
};

/// F_h * (RA(G) + RA(|FFT(G)|)), broadcast over channels. `guidance` is a
/// one-channel logit map at the resolution of `features`.
torch::Tensor sf_reverse_attention(const torch::Tensor& features, const torch::Tensor& guidance);

/// The multiplier RA(G) + RA(|FFT(G)|) alone; always inside (0, 2).
torch::Tensor sf_reverse_multiplier(const torch::Tensor& guidance);

class SpectralFilterImpl : public torch::nn::Module {
 public:
  SpectralFilterImpl(int64_t channels, int64_t height, int64_t width, FreqPathMode mode);
  torch::Tensor forward(const torch::Tensor& x);

  torch::Tensor weight_real;  // [C,H,W]
  torch::Tensor weight_imag;  // [C,H,W]

 private:
  FreqPathMode mode_;
};
TORCH_MODULE(SpectralFilter);

/// Unsharp-mask gradient enhancement x + lambda * (x - mean3x3(x)) with a
/// learnable lambda (init 1). The local mean uses replicated borders and is
/// computed from neighbour differences, so constant maps pass through
/// bit-exactly.
class GradientEnhancementImpl : public torch::nn::Module {
 public:
  GradientEnhancementImpl();
  torch::Tensor forward(const torch::Tensor& x);

  torch::Tensor lambda;
};
TORCH_MODULE(GradientEnhancement);

/// One level of the dual-branch joint optimization decoder.
class DjoLevelImpl : public torch::nn::Module {
 public:
  /// `height`/`width` fix the spectral filter grid for this level.
  DjoLevelImpl(int64_t height, int64_t width, const DjoConfig& config);

  /// `guidance` holds higher-level logit maps ordered nearest level first
  /// (R6 alone at the top level). Maps are upsampled to the resolution of
  /// `features`; their sum steers the level and the first map is added back
  /// as the residual of the saliency head. Throws on an empty list.
  DjoLevelOutputs forward(const torch::Tensor& features, const std::vector<torch::Tensor>& guidance);

  torch::Tensor saliency_branch(const torch::Tensor& in1);
  /// Returns {H_e1, H_em}.
  std::pair<torch::Tensor, torch::Tensor> edge_branch(const torch::Tensor& in1);

  SpectralFilter spectral{nullptr};
  GradientEnhancement gef{nullptr};

 private:
  ConvUnit project_{nullptr};
  AdaptiveFusion fusion_{nullptr};
  ConvUnit local_{nullptr};
  torch::nn::Sequential small_kernel_{nullptr};
  SpatialGate spatial_{nullptr};
  ConvUnit edge_conv_{nullptr};
  ConvUnit edge_merge_{nullptr};
  torch::nn::Sequential edge_head_{nullptr};
  torch::nn::Sequential sal_head_{nullptr};
};
TORCH_MODULE(DjoLevel);

}  // namespace udcnet
