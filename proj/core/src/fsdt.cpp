#include "udcnet/fsdt.hpp"

#include <fmt/format.h>
#include <fmt/ranges.h>

#include <cmath>

#include "udcnet/error.hpp"

namespace udcnet {

namespace F = torch::nn::functional;

CdffnGlobalMode parse_cdffn_global_mode(std::string_view name) {
  if (name == "literal") return CdffnGlobalMode::kLiteral;
  if (name == "phase_preserving") return CdffnGlobalMode::kPhasePreserving;
  throw Error("invalid_config",
              fmt::format("unknown cdffn_global_mode '{}' (expected literal|phase_preserving)", name));
}

std::string_view to_string(CdffnGlobalMode mode) {
  return mode == CdffnGlobalMode::kLiteral ? "literal" : "phase_preserving";
}

void FsdtConfig::validate() const {
  if (channels <= 0) throw Error("invalid_config", "fsdt.channels must be positive");
  if (heads <= 0 || channels % heads != 0) {
    throw Error("invalid_config",
                fmt::format("fsdt.heads={} must divide channels={}", heads, channels));
  }
  if (dw_kernels.empty()) throw Error("invalid_config", "fsdt.dw_kernels must not be empty");
  for (auto k : dw_kernels) {
    if (k < 3 || k % 2 == 0) {
      throw Error("invalid_config", fmt::format("fsdt.dw_kernels entry {} must be odd and >= 3", k));
    }
  }
  if (le_dilations.empty()) throw Error("invalid_config", "fsdt.le_dilations must not be empty");
  for (auto d : le_dilations) {
    if (d <= 0) throw Error("invalid_config", "fsdt.le_dilations must be positive");
  }
  if (!(ffn_expansion > 0.0)) throw Error("invalid_config", "fsdt.ffn_expansion must be positive");
}

int64_t FsdtConfig::ffn_hidden() const {
  return std::max<int64_t>(1, static_cast<int64_t>(std::llround(ffn_expansion * channels)));
}

namespace {

// [B, C, H, W] -> [B, heads, C/heads, H*W]
torch::Tensor to_heads(const torch::Tensor& x, int64_t heads) {
  return x.reshape({x.size(0), heads, x.size(1) / heads, x.size(2) * x.size(3)});
}

torch::Tensor from_heads(const torch::Tensor& x, const at::IntArrayRef shape) {
  return x.reshape(shape);
}

}  // namespace

// ---------------------------------------------------------------------------

FuseInputsImpl::FuseInputsImpl(int64_t in_channels, int64_t next_channels, int64_t channels)
    : next_channels_(next_channels) {
  reduce_ = register_module("reduce", pointwise(in_channels + next_channels, channels));
  norm_ = register_module("norm", LayerNorm2d(channels));
}

torch::Tensor FuseInputsImpl::forward(const torch::Tensor& origin,
                                      const std::optional<torch::Tensor>& next) {
  torch::Tensor merged = origin;
  if (next_channels_ > 0) {
    if (!next) throw Error("shape_mismatch", "FSDT block below the top level needs F_{i+1}^h");
    auto up = resize_bilinear(*next, next->size(2) * 2, next->size(3) * 2);
    if (up.size(2) != origin.size(2) || up.size(3) != origin.size(3)) {
      throw Error("shape_mismatch",
                  fmt::format("upsampled higher level is {}x{} but F_o is {}x{}", up.size(2),
                              up.size(3), origin.size(2), origin.size(3)));
    }
    merged = torch::cat({origin, up}, 1);
  }
  return norm_->forward(reduce_->forward(merged));
}

// ---------------------------------------------------------------------------

SpatialSelfAttentionImpl::SpatialSelfAttentionImpl(const FsdtConfig& config) : heads_(config.heads) {
  const int64_t c = config.channels;
  const char* names[] = {"q", "k", "v"};
  depthwise_.resize(3);
  for (size_t i = 0; i < 3; ++i) {
    pointwise_.push_back(register_module(fmt::format("{}_pw", names[i]), pointwise(c, c)));
    for (auto k : config.dw_kernels) {
      depthwise_[i].push_back(
          register_module(fmt::format("{}_dw{}", names[i], k), depthwise(c, k)));
    }
  }
  temperature = register_parameter("temperature", torch::ones({heads_}));
  out_ = register_module("out", pointwise(c, c));
}

torch::Tensor SpatialSelfAttentionImpl::project(size_t which, const torch::Tensor& x) {
  auto p = pointwise_[which]->forward(x);
  torch::Tensor sum;
  for (auto& dw : depthwise_[which]) {
    auto y = dw->forward(p);
    sum = sum.defined() ? sum + y : y;
  }
  return sum;
}

torch::Tensor SpatialSelfAttentionImpl::forward(const torch::Tensor& x) {
  const int64_t batch = x.size(0);
  auto q = F::normalize(to_heads(project(0, x), heads_), F::NormalizeFuncOptions().dim(-1));
  auto k = F::normalize(to_heads(project(1, x), heads_), F::NormalizeFuncOptions().dim(-1));
  auto v = to_heads(project(2, x), heads_);
  auto logits = counted_matmul(q, k.transpose(-2, -1), batch) * temperature.view({1, -1, 1, 1});
  last_attention = torch::softmax(logits, -1);
  auto mixed = counted_matmul(last_attention, v, batch);
  return out_->forward(from_heads(mixed, x.sizes()));
}

// ---------------------------------------------------------------------------

FrequencySelfAttentionImpl::FrequencySelfAttentionImpl(const FsdtConfig& config)
    : heads_(config.heads), policy_(config.complex_softmax) {
  const int64_t c = config.channels;
  for (const char* name : {"q", "k", "v"}) {
    pointwise_.push_back(register_module(fmt::format("{}_pw", name), pointwise(c, c)));
  }
  temperature = register_parameter("temperature", torch::ones({heads_}));
  out_ = register_module("out", pointwise(c, c));
}

torch::Tensor FrequencySelfAttentionImpl::forward(const torch::Tensor& x) {
  auto spectrum = [&](size_t i) {
    auto s = freq::fft2d(pointwise_[i]->forward(x));
    return freq::ComplexSpectrum(to_heads(s.real, heads_), to_heads(s.imag, heads_));
  };
  auto unit_rows = [](const freq::ComplexSpectrum& s) {
    auto norm = (s.real.pow(2) + s.imag.pow(2)).sum(-1, /*keepdim=*/true).sqrt().clamp_min(1e-12);
    return freq::ComplexSpectrum(s.real / norm, s.imag / norm);
  };
  auto q = unit_rows(spectrum(0));
  auto k = unit_rows(spectrum(1));
  auto v = spectrum(2);

  auto logits = freq::complex_matmul(q, freq::transpose_last(k));
  const int64_t c_head = q.real.size(-2);
  const int64_t tokens = q.real.size(-1);
  // Four real products per complex product, for both matmuls.
  MacCounter::add(2 * 4 * heads_ * c_head * c_head * tokens);
  auto scale = temperature.view({1, -1, 1, 1});
  logits = freq::ComplexSpectrum(logits.real * scale, logits.imag * scale);
  last_attention = freq::complex_softmax(logits, -1, policy_);
  auto mixed = freq::complex_matmul(last_attention, v);
  freq::ComplexSpectrum grid(from_heads(mixed.real, x.sizes()), from_heads(mixed.imag, x.sizes()));
  return out_->forward(freq::magnitude(freq::ifft2d_complex(grid)));
}

// ---------------------------------------------------------------------------

AdaptiveFusionImpl::AdaptiveFusionImpl(int64_t channels) : channels_(channels) {
  reduce_ = register_module(
      "reduce", torch::nn::Sequential(conv_bn_relu(4 * channels, 3 * channels, 1),
                                      conv_bn_relu(3 * channels, 2 * channels, 3),
                                      conv_bn_relu(2 * channels, channels, 3)));
  attention = register_module("attention", ResidualCbam(channels));
}

torch::Tensor AdaptiveFusionImpl::forward(const torch::Tensor& a, const torch::Tensor& b) {
  if (a.sizes() != b.sizes()) {
    throw Error("shape_mismatch", fmt::format("AFS inputs differ: [{}] vs [{}]",
                                              fmt::join(a.sizes(), ","), fmt::join(b.sizes(), ",")));
  }
  if (a.size(1) != channels_) {
    throw Error("shape_mismatch",
                fmt::format("AFS expects {} channels, got {}", channels_, a.size(1)));
  }
  auto fused = reduce_->forward(torch::cat({a, b, a + b, a * b}, 1));
  return attention->forward(fused);
}

// ---------------------------------------------------------------------------

CrossDomainFfnImpl::CrossDomainFfnImpl(const FsdtConfig& config) : mode_(config.cdffn_global_mode) {
  const int64_t c = config.channels;
  const int64_t h = config.ffn_hidden();
  norm = register_module("norm", LayerNorm2d(c));
  project_in = register_module("project_in", pointwise(c, h));
  gate_ = register_module("gate", depthwise(h, 3));
  value_ = register_module("value", depthwise(h, 3));
  for (auto d : config.le_dilations) {
    enhance_.push_back(register_module(fmt::format("enhance_d{}", d), depthwise(h, 3, d)));
  }
  enhance_proj_ = register_module("enhance_proj", pointwise(h, h));
  out_ = register_module("out", pointwise(2 * h, c));
}

torch::Tensor CrossDomainFfnImpl::local_branch(const torch::Tensor& in3) {
  auto gated = torch::gelu(gate_->forward(in3)) * value_->forward(in3);
  torch::Tensor sum;
  for (auto& conv : enhance_) {
    auto y = conv->forward(gated);
    sum = sum.defined() ? sum + y : y;
  }
  return enhance_proj_->forward(sum);
}

torch::Tensor CrossDomainFfnImpl::global_branch(const torch::Tensor& in3) const {
  auto spectrum = freq::fft2d(in3);
  auto mod = freq::magnitude(spectrum);
  if (mode_ == CdffnGlobalMode::kLiteral) {
    auto gated = torch::gelu(mod) * mod;
    return freq::magnitude(freq::ifft2d_complex(freq::fft2d(gated)));
  }
  // GELU(S) * S * exp(i * phase) == GELU(S) * X, which stays smooth at S = 0.
  auto g = torch::gelu(mod);
  return freq::ifft2d(freq::ComplexSpectrum(spectrum.real * g, spectrum.imag * g));
}

torch::Tensor CrossDomainFfnImpl::forward(const torch::Tensor& x) {
  auto in3 = project_in->forward(norm->forward(x));
  return out_->forward(torch::cat({local_branch(in3), global_branch(in3)}, 1));
}

// ---------------------------------------------------------------------------

FsdtBlockImpl::FsdtBlockImpl(int64_t in_channels, bool has_next, const FsdtConfig& config)
    : has_next_(has_next) {
  config.validate();
  const int64_t c = config.channels;
  fuse = register_module("fuse", FuseInputs(in_channels, has_next ? c : 0, c));
  spsa = register_module("spsa", SpatialSelfAttention(config));
  fpsa = register_module("fpsa", FrequencySelfAttention(config));
  afs = register_module("afs", AdaptiveFusion(c));
  in2_proj_ = register_module("in2_proj", pointwise(in_channels, c));
  cdffn = register_module("cdffn", CrossDomainFfn(config));
  origin_conv_ = register_module("origin_conv", pointwise(in_channels, in_channels));
  out_proj_ = register_module("out_proj", pointwise(c + in_channels, c));
  residual_proj_ = register_module("residual_proj", pointwise(in_channels, c));
}

torch::Tensor FsdtBlockImpl::forward(const torch::Tensor& origin,
                                     const std::optional<torch::Tensor>& next) {
  auto in1 = fuse->forward(origin, has_next_ ? next : std::nullopt);
  auto fused = afs->forward(spsa->forward(in1), fpsa->forward(in1));
  auto in2 = fused + in2_proj_->forward(origin);
  auto cd = cdffn->forward(in2);
  return out_proj_->forward(torch::cat({cd + in2, origin_conv_->forward(origin)}, 1)) +
         residual_proj_->forward(origin);
}

}  // namespace udcnet
