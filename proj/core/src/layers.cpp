#include "udcnet/layers.hpp"

namespace udcnet {

namespace {
thread_local MacCounter* active_counter = nullptr;
}

MacCounter::MacCounter() : previous_(active_counter) { active_counter = this; }

MacCounter::~MacCounter() { active_counter = previous_; }

void MacCounter::add(int64_t macs_per_sample) {
  if (active_counter != nullptr) active_counter->total_ += macs_per_sample;
}

ConvUnitImpl::ConvUnitImpl(const ConvSpec& spec) : spec_(spec) {
  const int64_t padding = spec.dilation * (spec.kernel - 1) / 2;
  conv_ = register_module(
      "conv", torch::nn::Conv2d(torch::nn::Conv2dOptions(spec.in, spec.out, spec.kernel)
                                    .stride(spec.stride)
                                    .padding(padding)
                                    .dilation(spec.dilation)
                                    .groups(spec.groups)
                                    .bias(spec.bias)));
  if (spec.batch_norm) bn_ = register_module("bn", torch::nn::BatchNorm2d(spec.out));
}

torch::Tensor ConvUnitImpl::forward(const torch::Tensor& x) {
  auto y = conv_->forward(x);
  MacCounter::add(y.numel() / std::max<int64_t>(y.size(0), 1) * (spec_.in / spec_.groups) *
                  spec_.kernel * spec_.kernel);
  if (bn_) y = bn_->forward(y);
  if (spec_.relu) y = torch::relu(y);
  return y;
}

ConvUnit pointwise(int64_t in, int64_t out) { return ConvUnit(ConvSpec{.in = in, .out = out}); }

ConvUnit conv_bn_relu(int64_t in, int64_t out, int64_t kernel, int64_t dilation) {
  return ConvUnit(ConvSpec{.in = in,
                           .out = out,
                           .kernel = kernel,
                           .dilation = dilation,
                           .bias = false,
                           .batch_norm = true,
                           .relu = true});
}

ConvUnit depthwise(int64_t channels, int64_t kernel, int64_t dilation) {
  return ConvUnit(ConvSpec{
      .in = channels, .out = channels, .kernel = kernel, .dilation = dilation, .groups = channels});
}

CountedLinearImpl::CountedLinearImpl(int64_t in, int64_t out, bool bias) {
  linear = register_module("linear", torch::nn::Linear(torch::nn::LinearOptions(in, out).bias(bias)));
}

torch::Tensor CountedLinearImpl::forward(const torch::Tensor& x) {
  auto y = linear->forward(x);
  const auto& opts = linear->options;
  MacCounter::add(x.numel() / std::max<int64_t>(x.size(0), 1) / opts.in_features() *
                  opts.in_features() * opts.out_features());
  return y;
}

torch::Tensor counted_conv(torch::nn::Conv2d& conv, const torch::Tensor& x) {
  auto y = conv->forward(x);
  const auto& opts = conv->options;
  const auto& k = opts.kernel_size();
  MacCounter::add(y.numel() / std::max<int64_t>(y.size(0), 1) * (opts.in_channels() / opts.groups()) *
                  (*k)[0] * (*k)[1]);
  return y;
}

torch::Tensor counted_matmul(const torch::Tensor& a, const torch::Tensor& b, int64_t batch) {
  auto y = torch::matmul(a, b);
  MacCounter::add(y.numel() / std::max<int64_t>(batch, 1) * a.size(-1));
  return y;
}

LayerNorm2dImpl::LayerNorm2dImpl(int64_t channels, double eps) : eps_(eps) {
  weight = register_parameter("weight", torch::ones({channels}));
  bias = register_parameter("bias", torch::zeros({channels}));
}

torch::Tensor LayerNorm2dImpl::forward(const torch::Tensor& x) {
  auto mu = x.mean(1, /*keepdim=*/true);
  auto var = (x - mu).pow(2).mean(1, /*keepdim=*/true);
  auto normed = (x - mu) / torch::sqrt(var + eps_);
  return normed * weight.view({1, -1, 1, 1}) + bias.view({1, -1, 1, 1});
}

SpatialGateImpl::SpatialGateImpl() {
  conv_ = register_module("conv", ConvUnit(ConvSpec{.in = 2, .out = 1, .kernel = 7}));
}

torch::Tensor SpatialGateImpl::forward(const torch::Tensor& x) {
  auto avg = x.mean(1, /*keepdim=*/true);
  auto mx = std::get<0>(x.max(1, /*keepdim=*/true));
  return torch::sigmoid(conv_->forward(torch::cat({avg, mx}, 1)));
}

ChannelGateImpl::ChannelGateImpl(int64_t channels, int64_t reduction) {
  const int64_t hidden = std::max<int64_t>(1, channels / reduction);
  fc1_ = register_module("fc1", CountedLinear(channels, hidden));
  fc2_ = register_module("fc2", CountedLinear(hidden, channels));
}

torch::Tensor ChannelGateImpl::forward(const torch::Tensor& x) {
  auto avg = x.mean({2, 3});
  auto mx = std::get<0>(x.flatten(2).max(2));
  auto mlp = [this](const torch::Tensor& v) { return fc2_->forward(torch::relu(fc1_->forward(v))); };
  auto gate = torch::sigmoid(mlp(avg) + mlp(mx));
  return gate.unsqueeze(-1).unsqueeze(-1);
}

ResidualCbamImpl::ResidualCbamImpl(int64_t channels) {
  channel_ = register_module("channel", ChannelGate(channels));
  spatial_ = register_module("spatial", SpatialGate());
}

torch::Tensor ResidualCbamImpl::forward(const torch::Tensor& x) {
  last_channel_gate = channel_->forward(x);
  auto refined = x * last_channel_gate;
  last_spatial_gate = spatial_->forward(refined);
  return x + refined * last_spatial_gate;
}

torch::Tensor resize_bilinear(const torch::Tensor& x, int64_t height, int64_t width) {
  if (x.size(-2) == height && x.size(-1) == width) return x;
  namespace F = torch::nn::functional;
  return F::interpolate(x, F::InterpolateFuncOptions()
                               .size(std::vector<int64_t>{height, width})
                               .mode(torch::kBilinear)
                               .align_corners(false));
}

torch::Tensor reverse_attention(const torch::Tensor& x) { return 1.0 - torch::sigmoid(x); }

}  // namespace udcnet
