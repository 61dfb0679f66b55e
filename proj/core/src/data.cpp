#include "udcnet/data.hpp"

#include <fmt/format.h>
#include <fmt/ranges.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>
#include <random>
#include <set>

#include "udcnet/error.hpp"

namespace udcnet::data {

namespace fs = std::filesystem;
namespace F = torch::nn::functional;

namespace {

const std::set<std::string> kImageExtensions{".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff"};

bool is_image(const fs::path& p) {
  auto ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return kImageExtensions.count(ext) > 0;
}

std::map<std::string, std::string> stems_in(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error("data", fmt::format("missing directory '{}'", dir.string()));
  std::map<std::string, std::string> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file() || !is_image(entry.path())) continue;
    const auto stem = entry.path().stem().string();
    if (!out.emplace(stem, entry.path().string()).second) {
      throw Error("data", fmt::format("duplicate stem '{}' in '{}'", stem, dir.string()));
    }
  }
  return out;
}

uint64_t fnv1a(const std::string& s) {
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace

DatasetManifest load_manifest(const std::string& root, const std::string& split) {
  const fs::path base = fs::path(root) / split;
  const auto images = stems_in(base / "images");
  const auto masks = stems_in(base / "GT");
  std::vector<std::string> orphans;
  for (const auto& [stem, _] : images) {
    if (!masks.count(stem)) orphans.push_back("image:" + stem);
  }
  for (const auto& [stem, _] : masks) {
    if (!images.count(stem)) orphans.push_back("mask:" + stem);
  }
  if (!orphans.empty()) {
    throw Error("data", fmt::format("unpaired files in '{}': {}", base.string(),
                                    fmt::join(orphans, ", ")));
  }
  DatasetManifest m;
  m.split = split;
  for (const auto& [stem, path] : images) m.entries.push_back({stem, path, masks.at(stem)});
  return m;
}

std::pair<DatasetManifest, DatasetManifest> split_holdout(const DatasetManifest& manifest,
                                                          double fraction) {
  DatasetManifest train{manifest.split, {}};
  DatasetManifest val{manifest.split + "_holdout", {}};
  const uint64_t buckets = 1000;
  const auto cut = static_cast<uint64_t>(std::llround(fraction * double(buckets)));
  for (const auto& e : manifest.entries) {
    (fnv1a(e.stem) % buckets < cut ? val : train).entries.push_back(e);
  }
  if (val.entries.empty() && manifest.entries.size() >= 2) {
    auto smallest = std::min_element(train.entries.begin(), train.entries.end(),
                                     [](const auto& a, const auto& b) {
                                       return fnv1a(a.stem) % buckets < fnv1a(b.stem) % buckets;
                                     });
    val.entries.push_back(*smallest);
    train.entries.erase(smallest);
  }
  return {train, val};
}

std::vector<std::string> list_images(const std::string& dir) {
  if (!fs::is_directory(dir)) throw Error("data", fmt::format("missing directory '{}'", dir));
  std::vector<std::string> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && is_image(entry.path())) out.push_back(entry.path().string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

torch::Tensor read_image(const std::string& path) {
  cv::Mat bgr = cv::imread(path, cv::IMREAD_COLOR);
  if (bgr.empty()) throw Error("data", fmt::format("cannot read image '{}'", path));
  cv::Mat rgb;
  cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  auto t = torch::from_blob(rgb.data, {rgb.rows, rgb.cols, 3}, torch::kUInt8).clone();
  return t.permute({2, 0, 1}).to(torch::kFloat32).div_(255.0).contiguous();
}

torch::Tensor read_mask(const std::string& path) {
  cv::Mat gray = cv::imread(path, cv::IMREAD_GRAYSCALE);
  if (gray.empty()) throw Error("data", fmt::format("cannot read mask '{}'", path));
  auto t = torch::from_blob(gray.data, {1, gray.rows, gray.cols}, torch::kUInt8).clone();
  return (t >= 128).to(torch::kFloat32);
}

Sample load_sample(const ManifestEntry& entry) {
  Sample s;
  s.image = read_image(entry.image_path);
  s.sal_gt = read_mask(entry.mask_path);
  if (s.image.size(1) != s.sal_gt.size(1) || s.image.size(2) != s.sal_gt.size(2)) {
    throw Error("data", fmt::format("'{}': image {}x{} but mask {}x{}", entry.stem,
                                    s.image.size(1), s.image.size(2), s.sal_gt.size(1),
                                    s.sal_gt.size(2)));
  }
  s.edge_gt = derive_edge_gt(s.sal_gt);
  s.id = entry.stem;
  return s;
}

torch::Tensor derive_edge_gt(const torch::Tensor& sal_gt) {
  const bool batched = sal_gt.dim() == 4;
  auto x = batched ? sal_gt : sal_gt.unsqueeze(0);
  auto opts = F::MaxPool2dFuncOptions(3).stride(1).padding(1);
  auto dilated = F::max_pool2d(x, opts);
  auto eroded = -F::max_pool2d(-x, opts);
  auto edge = ((dilated - eroded) > 0.5).to(sal_gt.dtype());
  return batched ? edge : edge.squeeze(0);
}

namespace {

torch::Tensor resize_image(const torch::Tensor& img, int64_t h, int64_t w) {
  return F::interpolate(img.unsqueeze(0), F::InterpolateFuncOptions()
                                              .size(std::vector<int64_t>{h, w})
                                              .mode(torch::kBilinear)
                                              .align_corners(false))
      .squeeze(0);
}

torch::Tensor resize_mask(const torch::Tensor& mask, int64_t h, int64_t w) {
  return F::interpolate(mask.unsqueeze(0), F::InterpolateFuncOptions()
                                               .size(std::vector<int64_t>{h, w})
                                               .mode(torch::kNearest))
      .squeeze(0);
}

}  // namespace

Sample augment(const Sample& sample, uint64_t seed, const AugmentOptions& options) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const bool flip = options.force_flip.value_or(unit(rng) < options.flip_p);
  const bool rotate = unit(rng) < options.rotate_p;
  const int random_turns = 1 + static_cast<int>(rng() % 3);
  const int turns = options.force_quarter_turns.value_or(rotate ? random_turns : 0);
  const double scale = options.crop_min_scale + (1.0 - options.crop_min_scale) * unit(rng);
  const double off_y = unit(rng);
  const double off_x = unit(rng);

  Sample out = sample;
  auto geometric = [&](torch::Tensor t) {
    if (flip) t = t.flip({-1});
    if (turns % 4 != 0) t = torch::rot90(t, turns % 4, {-2, -1});
    return t.contiguous();
  };
  out.image = geometric(sample.image);
  out.sal_gt = geometric(sample.sal_gt);

  if (options.crop && scale < 1.0) {
    const int64_t h = out.image.size(1);
    const int64_t w = out.image.size(2);
    const int64_t ch = std::max<int64_t>(1, std::llround(scale * double(h)));
    const int64_t cw = std::max<int64_t>(1, std::llround(scale * double(w)));
    const auto y0 = static_cast<int64_t>(off_y * double(h - ch + 1)) % (h - ch + 1);
    const auto x0 = static_cast<int64_t>(off_x * double(w - cw + 1)) % (w - cw + 1);
    out.image = resize_image(out.image.narrow(1, y0, ch).narrow(2, x0, cw), h, w);
    out.sal_gt = resize_mask(out.sal_gt.narrow(1, y0, ch).narrow(2, x0, cw), h, w);
  }
  out.edge_gt = derive_edge_gt(out.sal_gt);
  return out;
}

torch::Tensor normalize_image(const torch::Tensor& image) {
  auto opts = torch::TensorOptions().dtype(image.dtype());
  auto mean = torch::tensor({kImageMean[0], kImageMean[1], kImageMean[2]}, opts);
  auto stdv = torch::tensor({kImageStd[0], kImageStd[1], kImageStd[2]}, opts);
  const std::vector<int64_t> shape =
      image.dim() == 4 ? std::vector<int64_t>{1, 3, 1, 1} : std::vector<int64_t>{3, 1, 1};
  return (image - mean.view(shape)) / stdv.view(shape);
}

Sample resize_normalize(const Sample& sample, int64_t size) {
  Sample out;
  out.id = sample.id;
  out.image = normalize_image(resize_image(sample.image, size, size));
  out.sal_gt = resize_mask(sample.sal_gt, size, size);
  out.edge_gt = derive_edge_gt(out.sal_gt);
  return out;
}

torch::Tensor rasterize(const std::vector<SynthShape>& shapes, int64_t size) {
  auto mask = torch::zeros({1, size, size});
  auto acc = mask.accessor<float, 3>();
  for (int64_t r = 0; r < size; ++r) {
    for (int64_t c = 0; c < size; ++c) {
      const double y = double(r) + 0.5;
      const double x = double(c) + 0.5;
      for (const auto& s : shapes) {
        const double dy = (y - s.cy) / s.ry;
        const double dx = (x - s.cx) / s.rx;
        const bool inside = s.kind == SynthShape::Kind::kEllipse
                                ? dy * dy + dx * dx <= 1.0
                                : std::abs(dy) <= 1.0 && std::abs(dx) <= 1.0;
        if (inside) {
          acc[0][r][c] = 1.0f;
          break;
        }
      }
    }
  }
  return mask;
}

namespace {

torch::Tensor texture(std::mt19937_64& rng, int64_t size) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto ys = torch::arange(size, torch::kFloat64).view({size, 1}).expand({size, size});
  auto xs = torch::arange(size, torch::kFloat64).view({1, size}).expand({size, size});
  std::vector<torch::Tensor> channels;
  for (int ch = 0; ch < 3; ++ch) {
    auto plane = torch::full({size, size}, 0.25 + 0.5 * unit(rng), torch::kFloat64);
    for (int k = 0; k < 3; ++k) {
      const double fy = 0.05 + 0.4 * unit(rng);
      const double fx = 0.05 + 0.4 * unit(rng);
      const double phase = 6.283185307179586 * unit(rng);
      plane = plane + 0.06 * torch::sin(fy * ys + fx * xs + phase);
    }
    channels.push_back(plane);
  }
  return torch::stack(channels);
}

}  // namespace

SynthItem synth_sample(int64_t index, int64_t size, uint64_t seed) {
  std::mt19937_64 rng(seed * 1000003ull + static_cast<uint64_t>(index));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double side = double(size);
  SynthItem item;
  torch::Tensor mask;
  for (;;) {
    std::vector<SynthShape> shapes;
    const int count = 1 + static_cast<int>(rng() % 2);
    for (int k = 0; k < count; ++k) {
      SynthShape s;
      s.kind = unit(rng) < 0.5 ? SynthShape::Kind::kEllipse : SynthShape::Kind::kRectangle;
      s.ry = side * (0.1 + 0.2 * unit(rng));
      s.rx = side * (0.1 + 0.2 * unit(rng));
      s.cy = s.ry + (side - 2.0 * s.ry) * unit(rng);
      s.cx = s.rx + (side - 2.0 * s.rx) * unit(rng);
      shapes.push_back(s);
    }
    mask = rasterize(shapes, size);
    const double frac = mask.mean().item<double>();
    if (frac >= 0.05 && frac <= 0.6) {
      item.shapes = std::move(shapes);
      break;
    }
  }
  auto background = texture(rng, size);
  auto foreground = texture(rng, size);
  // Push the foreground away from the background mean so the object is
  // visible in every channel.
  auto shift = torch::where(background.mean({1, 2}, true) > 0.5, -0.3, 0.3);
  foreground = foreground + shift;
  auto m = mask.to(torch::kFloat64);
  auto image = (background * (1.0 - m) + foreground * m).clamp(0.0, 1.0).to(torch::kFloat32);
  item.sample.image = image;
  item.sample.sal_gt = mask;
  item.sample.edge_gt = derive_edge_gt(mask);
  item.sample.id = fmt::format("synth_{:04d}", index);
  return item;
}

std::vector<Sample> synth_dataset(int64_t n, int64_t size, uint64_t seed) {
  std::vector<Sample> out;
  out.reserve(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) out.push_back(synth_sample(i, size, seed).sample);
  return out;
}

Batch make_batch(const Dataset& dataset, const std::vector<size_t>& indices, int64_t size,
                 bool train, uint64_t seed, int64_t epoch) {
  std::vector<torch::Tensor> images;
  std::vector<torch::Tensor> sal;
  std::vector<torch::Tensor> edge;
  Batch batch;
  for (size_t index : indices) {
    auto sample = dataset.get(index);
    if (train) {
      const uint64_t sample_seed =
          seed + static_cast<uint64_t>(epoch) * dataset.size() + static_cast<uint64_t>(index);
      sample = augment(sample, sample_seed);
    }
    sample = resize_normalize(sample, size);
    images.push_back(sample.image);
    sal.push_back(sample.sal_gt);
    edge.push_back(sample.edge_gt);
    batch.ids.push_back(sample.id);
  }
  batch.images = torch::stack(images);
  batch.sal_gt = torch::stack(sal);
  batch.edge_gt = torch::stack(edge);
  return batch;
}

}  // namespace udcnet::data
