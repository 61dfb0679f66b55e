#include "udcnet/model.hpp"

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "udcnet/error.hpp"

namespace udcnet {

void UdcNetConfig::validate() const {
  if (channels <= 0) throw Error("invalid_config", "decoder channels must be positive");
  if (image_size <= 0 || image_size % 32 != 0) {
    throw Error("invalid_config",
                fmt::format("image_size {} must be a positive multiple of 32", image_size));
  }
  fsdt.validate();
  dse.validate();
}

torch::Tensor ModelOutput::prediction(int64_t height, int64_t width) const {
  return torch::sigmoid(resize_bilinear(sal_logits.at(2), height, width));
}

torch::Tensor ModelOutput::edge_prediction(int64_t height, int64_t width) const {
  return torch::sigmoid(resize_bilinear(edge_logits.at(2), height, width));
}

PlainHeadImpl::PlainHeadImpl(int64_t channels) {
  hidden_ = register_module("hidden", conv_bn_relu(channels, channels, 3));
  out_ = register_module("out", pointwise(channels, 1));
}

torch::Tensor PlainHeadImpl::forward(const torch::Tensor& x) {
  return out_->forward(hidden_->forward(x));
}

std::vector<int> guidance_levels(int level) {
  if (level == 5) return {6};
  std::vector<int> out;
  for (int j = level + 1; j <= std::min(level + 3, 5); ++j) out.push_back(j);
  return out;
}

UdcNetImpl::UdcNetImpl(const UdcNetConfig& config) : config_(config) {
  config_.fsdt.channels = config_.channels;
  config_.dse.channels = config_.channels;
  config_.djo.channels = config_.channels;
  config_.validate();
  const int64_t c = config_.channels;

  backbone_ = register_module("backbone", make_backbone(config_.backbone));
  const auto enc = backbone_->channels();

  for (int i = 0; i < 4; ++i) {
    const int level = i + 2;
    if (config_.use_fsdt) {
      fsdt_[i] = register_module(fmt::format("fsdt{}", level),
                                 FsdtBlock(enc[i], level < 5, config_.fsdt));
    } else {
      lateral_[i] = register_module(fmt::format("lateral{}", level), pointwise(enc[i], c));
    }
  }

  if (config_.use_dse) {
    dse_ = register_module("dse", DenseSemanticExcavation(enc[3], config_.dse));
  } else {
    r6_head_ = register_module("r6_head", pointwise(c, 1));
  }

  for (int i = 0; i < 4; ++i) {
    const int level = i + 2;
    const int64_t side = config_.image_size >> level;
    if (config_.use_djo) {
      djo_[i] = register_module(fmt::format("djo{}", level), DjoLevel(side, side, config_.djo));
    } else {
      sal_heads_[i] = register_module(fmt::format("sal_head{}", level), PlainHead(c));
      edge_heads_[i] = register_module(fmt::format("edge_head{}", level), PlainHead(c));
    }
  }
}

torch::Tensor UdcNetImpl::decode_level(int level, const torch::Tensor& origin,
                                       const std::optional<torch::Tensor>& next) {
  const int i = level - 2;
  if (config_.use_fsdt) return fsdt_[i]->forward(origin, next);
  auto y = lateral_[i]->forward(origin);
  if (next) y = y + resize_bilinear(*next, y.size(2), y.size(3));
  return y;
}

ModelOutput UdcNetImpl::forward(const torch::Tensor& image) {
  const auto pyramid = backbone_->forward(image);

  std::map<int, torch::Tensor> hidden;
  std::optional<torch::Tensor> next;
  for (int level = 5; level >= 2; --level) {
    hidden[level] = decode_level(level, pyramid.level(level), next);
    next = hidden[level];
  }

  ModelOutput out;
  out.r6 = config_.use_dse ? dse_->forward(pyramid.f5, hidden[5]) : r6_head_->forward(hidden[5]);

  for (int level = 5; level >= 2; --level) {
    const int i = level - 2;
    if (config_.use_djo) {
      std::vector<torch::Tensor> guidance;
      for (int j : guidance_levels(level)) guidance.push_back(j == 6 ? out.r6 : out.sal_logits[j]);
      auto res = djo_[i]->forward(hidden[level], guidance);
      out.sal_logits[level] = res.sal_logits;
      out.edge_logits[level] = res.edge_logits;
    } else {
      out.sal_logits[level] = sal_heads_[i]->forward(hidden[level]);
      out.edge_logits[level] = edge_heads_[i]->forward(hidden[level]);
    }
  }
  return out;
}

int64_t count_parameters(torch::nn::Module& module) {
  int64_t total = 0;
  for (const auto& p : module.parameters(true)) total += p.numel();
  return total;
}

Capacity count_params_flops(UdcNetConfig config) {
  config.backbone.weights.clear();
  UdcNet net(config);
  net->eval();
  Capacity cap;
  cap.params = count_parameters(*net);
  torch::NoGradGuard guard;
  MacCounter counter;
  net->forward(torch::zeros({1, 3, config.image_size, config.image_size}));
  cap.macs = counter.total();
  return cap;
}

}  // namespace udcnet
