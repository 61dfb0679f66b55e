#include "udcnet/dse.hpp"

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "udcnet/error.hpp"

namespace udcnet {

void DseConfig::validate() const {
  if (channels <= 0) throw Error("invalid_config", "dse.channels must be positive");
  if (dilations.empty()) throw Error("invalid_config", "dse.dilations must not be empty");
  for (size_t i = 0; i < dilations.size(); ++i) {
    if (dilations[i] <= 0 || (i > 0 && dilations[i] <= dilations[i - 1])) {
      throw Error("invalid_config",
                  fmt::format("dse.dilations must be positive and strictly increasing, got [{}]",
                              fmt::join(dilations, ", ")));
    }
  }
}

DenseSemanticExcavationImpl::DenseSemanticExcavationImpl(int64_t origin_channels,
                                                         const DseConfig& config) {
  config.validate();
  const int64_t c = config.channels;
  reduce_ = register_module("reduce", conv_bn_relu(origin_channels + c, c, 1));
  point_ = register_module("point", pointwise(c, c));
  for (auto d : config.dilations) {
    atrous_.push_back(register_module(fmt::format("atrous_d{}", d), conv_bn_relu(c, c, 3, d)));
  }
  pooled_ = register_module("pooled", pointwise(2 * c, c));

  const int64_t n = branch_count();
  const int64_t wide = std::max<int64_t>(1, (2 * n + 1) / 3);
  const int64_t mid = std::max<int64_t>(1, (n + 1) / 3);
  merge_ = register_module(
      "merge", torch::nn::Sequential(conv_bn_relu(n * c, wide * c, 3), conv_bn_relu(wide * c, mid * c, 3),
                                     conv_bn_relu(mid * c, c, 3)));
  skip_ = register_module("skip", conv_bn_relu(origin_channels + c, c, 3));
  head_hidden_ = register_module("head_hidden", conv_bn_relu(c, c, 1));
  head_out_ = register_module("head_out", pointwise(c, 1));
}

torch::Tensor DenseSemanticExcavationImpl::forward(const torch::Tensor& origin,
                                                   const torch::Tensor& enhanced) {
  if (origin.size(2) != enhanced.size(2) || origin.size(3) != enhanced.size(3)) {
    throw Error("shape_mismatch",
                fmt::format("DSE inputs differ in resolution: {}x{} vs {}x{}", origin.size(2),
                            origin.size(3), enhanced.size(2), enhanced.size(3)));
  }
  auto joined = torch::cat({origin, enhanced}, 1);
  auto x = reduce_->forward(joined);

  std::vector<torch::Tensor> branches{point_->forward(x)};
  auto running = branches.front();
  for (auto& conv : atrous_) {
    auto y = conv->forward(x + running);
    running = running + y;
    branches.push_back(y);
  }
  auto avg = x.mean({2, 3}, /*keepdim=*/true);
  auto mx = std::get<0>(x.flatten(2).max(2, /*keepdim=*/true)).unsqueeze(-1);
  // A 1x1 conv commutes with spatial broadcasting, so apply it before expanding.
  branches.push_back(pooled_->forward(torch::cat({avg, mx}, 1)).expand_as(x));

  last_concat = torch::cat(branches, 1);
  auto merged = merge_->forward(last_concat) + skip_->forward(joined);
  return head_out_->forward(head_hidden_->forward(merged));
}

}  // namespace udcnet
