#include "udcnet/djo.hpp"

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "udcnet/error.hpp"
#include "udcnet/frequency_ops.hpp"

namespace udcnet {

namespace F = torch::nn::functional;

FreqPathMode parse_freq_path_mode(std::string_view name) {
  if (name == "spectral_filter") return FreqPathMode::kSpectralFilter;
  if (name == "literal") return FreqPathMode::kLiteral;
  throw Error("invalid_config",
              fmt::format("unknown freq_path '{}' (expected spectral_filter|literal)", name));
}

std::string_view to_string(FreqPathMode mode) {
  return mode == FreqPathMode::kSpectralFilter ? "spectral_filter" : "literal";
}

torch::Tensor sf_reverse_multiplier(const torch::Tensor& guidance) {
  return reverse_attention(guidance) + reverse_attention(freq::magnitude(freq::fft2d(guidance)));
}

torch::Tensor sf_reverse_attention(const torch::Tensor& features, const torch::Tensor& guidance) {
  return features * sf_reverse_multiplier(guidance);
}

SpectralFilterImpl::SpectralFilterImpl(int64_t channels, int64_t height, int64_t width,
                                       FreqPathMode mode)
    : mode_(mode) {
  weight_real = register_parameter("weight_real", torch::ones({channels, height, width}));
  weight_imag = register_parameter("weight_imag", torch::zeros({channels, height, width}));
}

torch::Tensor SpectralFilterImpl::forward(const torch::Tensor& x) {
  if (mode_ == FreqPathMode::kLiteral) {
    return freq::magnitude(freq::ifft2d_complex(freq::fft2d(x)));
  }
  if (x.size(1) != weight_real.size(0) || x.size(2) != weight_real.size(1) ||
      x.size(3) != weight_real.size(2)) {
    throw Error("shape_mismatch",
                fmt::format("spectral filter is {}x{}x{} but input is {}x{}x{}",
                            weight_real.size(0), weight_real.size(1), weight_real.size(2),
                            x.size(1), x.size(2), x.size(3)));
  }
  auto s = freq::fft2d(x);
  freq::ComplexSpectrum filtered(s.real * weight_real - s.imag * weight_imag,
                                 s.real * weight_imag + s.imag * weight_real);
  return freq::ifft2d(filtered);
}

GradientEnhancementImpl::GradientEnhancementImpl() {
  lambda = register_parameter("lambda", torch::ones({1}));
}

torch::Tensor GradientEnhancementImpl::forward(const torch::Tensor& x) {
  const int64_t h = x.size(2);
  const int64_t w = x.size(3);
  auto padded = F::pad(x, F::PadFuncOptions({1, 1, 1, 1}).mode(torch::kReplicate));
  torch::Tensor diff_sum;
  for (int64_t dy = 0; dy < 3; ++dy) {
    for (int64_t dx = 0; dx < 3; ++dx) {
      if (dy == 1 && dx == 1) continue;
      auto d = padded.narrow(2, dy, h).narrow(3, dx, w) - x;
      diff_sum = diff_sum.defined() ? diff_sum + d : d;
    }
  }
  // x - mean3x3(x) == -(sum of neighbour differences) / 9
  return x - lambda * (diff_sum / 9.0);
}

DjoLevelImpl::DjoLevelImpl(int64_t height, int64_t width, const DjoConfig& config) {
  const int64_t c = config.channels;
  project_ = register_module("project", pointwise(1, c));
  fusion_ = register_module("fusion", AdaptiveFusion(c));
  local_ = register_module("local", conv_bn_relu(c, c, 3));
  spectral = register_module("spectral", SpectralFilter(c, height, width, config.freq_path));
  small_kernel_ = register_module(
      "small_kernel",
      torch::nn::Sequential(conv_bn_relu(c, c, 1), conv_bn_relu(c, c, 3), conv_bn_relu(c, c, 1)));
  spatial_ = register_module("spatial", SpatialGate());
  edge_conv_ = register_module("edge_conv", conv_bn_relu(c, c, 3));
  edge_merge_ = register_module("edge_merge", pointwise(2 * c, c));
  edge_head_ = register_module(
      "edge_head", torch::nn::Sequential(conv_bn_relu(c, c, 3), conv_bn_relu(c, c, 3),
                                         ConvUnit(ConvSpec{.in = c, .out = 1, .kernel = 3})));
  gef = register_module("gef", GradientEnhancement());
  sal_head_ = register_module(
      "sal_head", torch::nn::Sequential(conv_bn_relu(3 * c, 2 * c, 3), conv_bn_relu(2 * c, c, 3),
                                        ConvUnit(ConvSpec{.in = c, .out = 1, .kernel = 3})));
}

torch::Tensor DjoLevelImpl::saliency_branch(const torch::Tensor& in1) {
  return local_->forward(in1) + spectral->forward(in1);
}

std::pair<torch::Tensor, torch::Tensor> DjoLevelImpl::edge_branch(const torch::Tensor& in1) {
  auto sc = small_kernel_->forward(in1);
  auto attended = sc * spatial_->forward(sc);
  auto e1 = edge_merge_->forward(torch::cat({attended, edge_conv_->forward(sc)}, 1));
  auto em = gef->forward(edge_head_->forward(e1));
  return {e1, em};
}

DjoLevelOutputs DjoLevelImpl::forward(const torch::Tensor& features,
                                      const std::vector<torch::Tensor>& guidance) {
  if (guidance.empty()) throw Error("shape_mismatch", "DJO level needs at least one guidance map");
  const int64_t h = features.size(2);
  const int64_t w = features.size(3);
  torch::Tensor residual;
  torch::Tensor summed;
  for (const auto& map : guidance) {
    if (map.size(1) != 1) {
      throw Error("shape_mismatch",
                  fmt::format("guidance maps must have one channel, got {}", map.size(1)));
    }
    auto up = resize_bilinear(map, h, w);
    if (!residual.defined()) residual = up;
    summed = summed.defined() ? summed + up : up;
  }

  auto in1 = fusion_->forward(project_->forward(summed), features);
  auto lg = saliency_branch(in1);
  auto ra = sf_reverse_attention(features, summed);
  auto [e1, em] = edge_branch(in1);
  auto sm = sal_head_->forward(torch::cat({lg, ra, e1}, 1)) + residual;
  return {sm, em};
}

}  // namespace udcnet
