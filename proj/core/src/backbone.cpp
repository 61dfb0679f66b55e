#include "udcnet/backbone.hpp"

#include <fmt/format.h>
#include <fmt/ranges.h>

#include <fstream>
#include <iterator>
#include <map>

#include "udcnet/error.hpp"

namespace udcnet {

const torch::Tensor& FeaturePyramid::level(int i) const {
  switch (i) {
    case 2: return f2;
    case 3: return f3;
    case 4: return f4;
    case 5: return f5;
    default: throw Error("invalid_argument", fmt::format("pyramid level {} outside 2..5", i));
  }
}

BackboneKind parse_backbone_kind(std::string_view name) {
  if (name == "toy") return BackboneKind::kToy;
  if (name == "resnet50") return BackboneKind::kResNet50;
  if (name == "pvt_v2_b2") return BackboneKind::kPvtV2B2;
  throw Error("invalid_config",
              fmt::format("unknown backbone '{}' (expected toy|resnet50|pvt_v2_b2)", name));
}

std::string_view to_string(BackboneKind kind) {
  switch (kind) {
    case BackboneKind::kToy: return "toy";
    case BackboneKind::kResNet50: return "resnet50";
    case BackboneKind::kPvtV2B2: return "pvt_v2_b2";
  }
  return "unknown";
}

FeaturePyramid Backbone::forward(const torch::Tensor& image) {
  if (image.dim() != 4 || image.size(1) != 3) {
    throw Error("invalid_input", "backbone expects a [B,3,H,W] image batch");
  }
  if (image.size(2) % 32 != 0 || image.size(3) % 32 != 0) {
    throw Error("invalid_input",
                fmt::format("image size {}x{} must be divisible by 32", image.size(2), image.size(3)));
  }
  return extract(image);
}

void Backbone::load_weights(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("weights", fmt::format("cannot open weight file '{}'", path));
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  c10::IValue loaded;
  try {
    loaded = torch::pickle_load(bytes);
  } catch (const c10::Error& e) {
    // The C++ unpickler cannot rebuild a top-level OrderedDict, which is what
    // state_dict() returns; a plain dict of the same tensors loads fine.
    throw Error("weights", fmt::format("'{}' could not be unpickled (save it with "
                                       "torch.save(dict(model.state_dict()), path)): {}",
                                       path, e.what_without_backtrace()));
  }
  if (!loaded.isGenericDict()) throw Error("weights", fmt::format("'{}' is not a dict", path));

  std::map<std::string, torch::Tensor> source;
  for (const auto& entry : loaded.toGenericDict()) {
    if (!entry.key().isString() || !entry.value().isTensor()) continue;
    const auto& key = entry.key().toStringRef();
    if (!ignored_key(key)) source.emplace(key, entry.value().toTensor());
  }

  std::map<std::string, torch::Tensor> target;
  for (const auto& item : named_parameters(true)) target.emplace(item.key(), item.value());
  for (const auto& item : named_buffers(true)) target.emplace(item.key(), item.value());

  std::vector<std::string> missing;
  torch::NoGradGuard guard;
  for (auto& [name, tensor] : target) {
    auto it = source.find(name);
    if (it == source.end()) {
      missing.push_back(name);
      continue;
    }
    if (it->second.sizes() != tensor.sizes()) {
      throw Error("weights", fmt::format("shape mismatch for '{}': file {} vs model {}", name,
                                         it->second.sizes(), tensor.sizes()));
    }
    tensor.copy_(it->second.to(tensor.dtype()));
    source.erase(it);
  }
  if (!missing.empty() || !source.empty()) {
    std::string detail;
    for (const auto& m : missing) detail += " missing:" + m;
    for (const auto& [k, _] : source) detail += " unexpected:" + k;
    throw Error("weights", fmt::format("'{}' does not match the encoder:{}", path, detail));
  }
}

// ---------------------------------------------------------------------------
// Toy encoder

ToyBackbone::ToyBackbone(const std::array<int64_t, 4>& channels) : channels_(channels) {
  int64_t in = 3;
  const std::array<int64_t, 5> widths{channels[0], channels[0], channels[1], channels[2],
                                      channels[3]};
  for (size_t i = 0; i < widths.size(); ++i) {
    stages_.push_back(register_module(
        fmt::format("stage{}", i + 1),
        ConvUnit(ConvSpec{.in = in,
                          .out = widths[i],
                          .kernel = 3,
                          .stride = 2,
                          .bias = false,
                          .batch_norm = true,
                          .relu = true})));
    in = widths[i];
  }
}

FeaturePyramid ToyBackbone::extract(const torch::Tensor& image) {
  std::array<torch::Tensor, 5> out;
  auto x = image;
  for (size_t i = 0; i < stages_.size(); ++i) {
    x = stages_[i]->forward(x);
    out[i] = x;
  }
  return {out[1], out[2], out[3], out[4]};
}

// ---------------------------------------------------------------------------
// ResNet-50

namespace {

torch::nn::Conv2d plain_conv(int64_t in, int64_t out, int64_t k, int64_t stride = 1) {
  return torch::nn::Conv2d(
      torch::nn::Conv2dOptions(in, out, k).stride(stride).padding(k / 2).bias(false));
}

class BottleneckImpl : public torch::nn::Module {
 public:
  BottleneckImpl(int64_t in, int64_t planes, int64_t stride) {
    conv1 = register_module("conv1", plain_conv(in, planes, 1));
    bn1 = register_module("bn1", torch::nn::BatchNorm2d(planes));
    conv2 = register_module("conv2", plain_conv(planes, planes, 3, stride));
    bn2 = register_module("bn2", torch::nn::BatchNorm2d(planes));
    conv3 = register_module("conv3", plain_conv(planes, planes * 4, 1));
    bn3 = register_module("bn3", torch::nn::BatchNorm2d(planes * 4));
    if (stride != 1 || in != planes * 4) {
      down_conv = plain_conv(in, planes * 4, 1, stride);
      downsample = register_module(
          "downsample", torch::nn::Sequential(down_conv, torch::nn::BatchNorm2d(planes * 4)));
    }
  }

  torch::Tensor forward(const torch::Tensor& x) {
    auto y = torch::relu(bn1->forward(counted_conv(conv1, x)));
    y = torch::relu(bn2->forward(counted_conv(conv2, y)));
    y = bn3->forward(counted_conv(conv3, y));
    torch::Tensor identity = x;
    if (downsample) identity = downsample[1]->as<torch::nn::BatchNorm2d>()->forward(
                        counted_conv(down_conv, x));
    return torch::relu(y + identity);
  }

  torch::nn::Conv2d conv1{nullptr}, conv2{nullptr}, conv3{nullptr}, down_conv{nullptr};
  torch::nn::BatchNorm2d bn1{nullptr}, bn2{nullptr}, bn3{nullptr};
  torch::nn::Sequential downsample{nullptr};
};
TORCH_MODULE(Bottleneck);

}  // namespace

ResNet50Backbone::ResNet50Backbone() {
  conv1_ = register_module(
      "conv1",
      torch::nn::Conv2d(torch::nn::Conv2dOptions(3, 64, 7).stride(2).padding(3).bias(false)));
  bn1_ = register_module("bn1", torch::nn::BatchNorm2d(64));
  const std::array<int64_t, 4> blocks{3, 4, 6, 3};
  const std::array<int64_t, 4> planes{64, 128, 256, 512};
  int64_t in = 64;
  for (size_t l = 0; l < 4; ++l) {
    torch::nn::Sequential layer;
    for (int64_t b = 0; b < blocks[l]; ++b) {
      const int64_t stride = (b == 0 && l > 0) ? 2 : 1;
      layer->push_back(Bottleneck(in, planes[l], stride));
      in = planes[l] * 4;
    }
    layers_[l] = register_module(fmt::format("layer{}", l + 1), layer);
  }
}

bool ResNet50Backbone::ignored_key(const std::string& key) const {
  return key.rfind("fc.", 0) == 0;
}

FeaturePyramid ResNet50Backbone::extract(const torch::Tensor& image) {
  auto x = torch::relu(bn1_->forward(counted_conv(conv1_, image)));
  x = torch::max_pool2d(x, 3, 2, 1);
  std::array<torch::Tensor, 4> out;
  for (size_t l = 0; l < 4; ++l) {
    for (auto& block : *layers_[l]) x = block.ptr()->as<BottleneckImpl>()->forward(x);
    out[l] = x;
  }
  return {out[0], out[1], out[2], out[3]};
}

// ---------------------------------------------------------------------------
// PVTv2-b2

namespace {

torch::Tensor counted_linear(torch::nn::Linear& fc, const torch::Tensor& x) {
  auto y = fc->forward(x);
  MacCounter::add(x.numel() / std::max<int64_t>(x.size(0), 1) * fc->options.out_features());
  return y;
}

torch::nn::LayerNorm layer_norm(int64_t dim, double eps) {
  return torch::nn::LayerNorm(torch::nn::LayerNormOptions({dim}).eps(eps));
}

}  // namespace

namespace detail {

class PvtPatchEmbed : public torch::nn::Module {
 public:
  PvtPatchEmbed(int64_t in, int64_t dim, int64_t kernel, int64_t stride) {
    proj = register_module(
        "proj", torch::nn::Conv2d(
                    torch::nn::Conv2dOptions(in, dim, kernel).stride(stride).padding(kernel / 2)));
    norm = register_module("norm", layer_norm(dim, 1e-5));
  }

  /// Returns tokens [B, H*W, C] and writes the token grid size.
  torch::Tensor forward(const torch::Tensor& x, int64_t& h, int64_t& w) {
    auto y = counted_conv(proj, x);
    h = y.size(2);
    w = y.size(3);
    return norm->forward(y.flatten(2).transpose(1, 2));
  }

  torch::nn::Conv2d proj{nullptr};
  torch::nn::LayerNorm norm{nullptr};
};

class PvtAttention : public torch::nn::Module {
 public:
  PvtAttention(int64_t dim, int64_t heads, int64_t sr_ratio)
      : heads_(heads), sr_ratio_(sr_ratio), scale_(1.0 / std::sqrt(double(dim / heads))) {
    q = register_module("q", torch::nn::Linear(dim, dim));
    kv = register_module("kv", torch::nn::Linear(dim, 2 * dim));
    proj = register_module("proj", torch::nn::Linear(dim, dim));
    if (sr_ratio > 1) {
      sr = register_module(
          "sr", torch::nn::Conv2d(torch::nn::Conv2dOptions(dim, dim, sr_ratio).stride(sr_ratio)));
      norm = register_module("norm", layer_norm(dim, 1e-5));
    }
  }

  torch::Tensor forward(const torch::Tensor& x, int64_t h, int64_t w) {
    const int64_t b = x.size(0);
    const int64_t n = x.size(1);
    const int64_t c = x.size(2);
    const int64_t hd = c / heads_;
    auto qh = counted_linear(q, x).reshape({b, n, heads_, hd}).permute({0, 2, 1, 3});
    torch::Tensor context = x;
    if (sr_ratio_ > 1) {
      auto grid = x.transpose(1, 2).reshape({b, c, h, w});
      context = norm->forward(counted_conv(sr, grid).flatten(2).transpose(1, 2));
    }
    auto kvh = counted_linear(kv, context).reshape({b, -1, 2, heads_, hd}).permute({2, 0, 3, 1, 4});
    auto attn = (counted_matmul(qh, kvh[0].transpose(-2, -1), b) * scale_).softmax(-1);
    auto y = counted_matmul(attn, kvh[1], b).transpose(1, 2).reshape({b, n, c});
    return counted_linear(proj, y);
  }

  torch::nn::Linear q{nullptr}, kv{nullptr}, proj{nullptr};
  torch::nn::Conv2d sr{nullptr};
  torch::nn::LayerNorm norm{nullptr};

 private:
  int64_t heads_;
  int64_t sr_ratio_;
  double scale_;
};

class PvtDwConv : public torch::nn::Module {
 public:
  explicit PvtDwConv(int64_t dim) {
    dwconv = register_module(
        "dwconv", torch::nn::Conv2d(torch::nn::Conv2dOptions(dim, dim, 3).padding(1).groups(dim)));
  }
  torch::nn::Conv2d dwconv{nullptr};
};

class PvtMlp : public torch::nn::Module {
 public:
  PvtMlp(int64_t dim, int64_t hidden) {
    fc1 = register_module("fc1", torch::nn::Linear(dim, hidden));
    dw = register_module("dwconv", std::make_shared<PvtDwConv>(hidden));
    fc2 = register_module("fc2", torch::nn::Linear(hidden, dim));
  }

  torch::Tensor forward(const torch::Tensor& x, int64_t h, int64_t w) {
    auto y = counted_linear(fc1, x);
    const int64_t b = y.size(0);
    const int64_t c = y.size(2);
    auto grid = y.transpose(1, 2).reshape({b, c, h, w});
    y = counted_conv(dw->dwconv, grid).flatten(2).transpose(1, 2);
    return counted_linear(fc2, torch::gelu(y));
  }

  torch::nn::Linear fc1{nullptr}, fc2{nullptr};
  std::shared_ptr<PvtDwConv> dw;
};

class PvtBlock : public torch::nn::Module {
 public:
  PvtBlock(int64_t dim, int64_t heads, int64_t mlp_ratio, int64_t sr_ratio) {
    norm1 = register_module("norm1", layer_norm(dim, 1e-6));
    attn = register_module("attn", std::make_shared<PvtAttention>(dim, heads, sr_ratio));
    norm2 = register_module("norm2", layer_norm(dim, 1e-6));
    mlp = register_module("mlp", std::make_shared<PvtMlp>(dim, dim * mlp_ratio));
  }

  torch::Tensor forward(const torch::Tensor& x, int64_t h, int64_t w) {
    auto y = x + attn->forward(norm1->forward(x), h, w);
    return y + mlp->forward(norm2->forward(y), h, w);
  }

  torch::nn::LayerNorm norm1{nullptr}, norm2{nullptr};
  std::shared_ptr<PvtAttention> attn;
  std::shared_ptr<PvtMlp> mlp;
};

}  // namespace detail

PvtV2B2Backbone::PvtV2B2Backbone() {
  const std::array<int64_t, 4> depths{3, 4, 6, 3};
  const std::array<int64_t, 4> dims{64, 128, 320, 512};
  const std::array<int64_t, 4> heads{1, 2, 5, 8};
  const std::array<int64_t, 4> mlp_ratios{8, 8, 4, 4};
  const std::array<int64_t, 4> sr_ratios{8, 4, 2, 1};
  int64_t in = 3;
  for (size_t s = 0; s < 4; ++s) {
    Stage stage;
    const int64_t kernel = s == 0 ? 7 : 3;
    const int64_t stride = s == 0 ? 4 : 2;
    stage.embed = register_module(fmt::format("patch_embed{}", s + 1),
                                  std::make_shared<detail::PvtPatchEmbed>(in, dims[s], kernel, stride));
    torch::nn::ModuleList list;
    for (int64_t b = 0; b < depths[s]; ++b) {
      auto block =
          std::make_shared<detail::PvtBlock>(dims[s], heads[s], mlp_ratios[s], sr_ratios[s]);
      list->push_back(block);
      stage.blocks.push_back(block);
    }
    register_module(fmt::format("block{}", s + 1), list);
    stage.norm = register_module(fmt::format("norm{}", s + 1), layer_norm(dims[s], 1e-6));
    stages_.push_back(std::move(stage));
    in = dims[s];
  }
}

bool PvtV2B2Backbone::ignored_key(const std::string& key) const {
  return key.rfind("head.", 0) == 0;
}

FeaturePyramid PvtV2B2Backbone::extract(const torch::Tensor& image) {
  std::array<torch::Tensor, 4> out;
  auto x = image;
  for (size_t s = 0; s < stages_.size(); ++s) {
    int64_t h = 0;
    int64_t w = 0;
    auto tokens = stages_[s].embed->forward(x, h, w);
    for (auto& block : stages_[s].blocks) tokens = block->forward(tokens, h, w);
    tokens = stages_[s].norm->forward(tokens);
    x = tokens.transpose(1, 2).reshape({tokens.size(0), -1, h, w});
    out[s] = x;
  }
  return {out[0], out[1], out[2], out[3]};
}

std::shared_ptr<Backbone> make_backbone(const BackboneConfig& config) {
  std::shared_ptr<Backbone> net;
  switch (config.kind) {
    case BackboneKind::kToy: net = std::make_shared<ToyBackbone>(config.toy_channels); break;
    case BackboneKind::kResNet50: net = std::make_shared<ResNet50Backbone>(); break;
    case BackboneKind::kPvtV2B2: net = std::make_shared<PvtV2B2Backbone>(); break;
  }
  if (!config.weights.empty()) net->load_weights(config.weights);
  return net;
}

}  // namespace udcnet
