#pragma once

#include <torch/torch.h>

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace udcnet::data {

/// One training or evaluation example. `image` is [3,H,W] in [0,1] unless
/// it has been through resize_normalize; masks are [1,H,W] in {0,1}.
struct Sample {
  torch::Tensor image;
  torch::Tensor sal_gt;
  torch::Tensor edge_gt;
  std::string id;
};

struct ManifestEntry {
  std::string stem;
  std::string image_path;
  std::string mask_path;
};

struct DatasetManifest {
  std::string split;
  std::vector<ManifestEntry> entries;
};

/// Pairs `<root>/<split>/images/*` with `<root>/<split>/GT/*` by file stem,
/// sorted by stem. Throws Error("data") naming every orphan.
DatasetManifest load_manifest(const std::string& root, const std::string& split);

/// Deterministic holdout of about `fraction` of the entries, chosen by a
/// stable hash of the stem. Returns {train, validation}; the validation part
/// is never empty when there are at least two entries.
std::pair<DatasetManifest, DatasetManifest> split_holdout(const DatasetManifest& manifest,
                                                          double fraction = 0.1);

/// Sorted image files (png/jpg/jpeg/bmp/tif) in a directory.
std::vector<std::string> list_images(const std::string& dir);

/// Reads an 8-bit RGB image as a [3,H,W] float tensor in [0,1].
torch::Tensor read_image(const std::string& path);
/// Reads an 8-bit mask and binarises it at 128.
torch::Tensor read_mask(const std::string& path);

Sample load_sample(const ManifestEntry& entry);

/// dilate3x3(mask) - erode3x3(mask), binarised. Accepts [1,H,W] or
/// [B,1,H,W]. Pixels outside the map are ignored by both operators.
torch::Tensor derive_edge_gt(const torch::Tensor& sal_gt);

struct AugmentOptions {
  double flip_p = 0.5;
  double rotate_p = 0.5;
  double crop_min_scale = 0.75;
  /// When set, overrides the random flip decision.
  std::optional<bool> force_flip;
  /// When set to 0..3, overrides the random quarter-turn count.
  std::optional<int> force_quarter_turns;
  bool crop = true;
};

/// Horizontal flip, right-angle rotation and random crop resized back to
/// the input size, all driven by `seed`. The edge map is re-derived from
/// the transformed mask.
Sample augment(const Sample& sample, uint64_t seed, const AugmentOptions& options = {});

constexpr std::array<double, 3> kImageMean{0.485, 0.456, 0.406};
constexpr std::array<double, 3> kImageStd{0.229, 0.224, 0.225};

/// Per-channel (x - mean) / std. Works on [3,H,W] and [B,3,H,W].
torch::Tensor normalize_image(const torch::Tensor& image);

/// Bilinear image resize, nearest mask resize, edge re-derivation and
/// image normalisation.
Sample resize_normalize(const Sample& sample, int64_t size);

struct SynthShape {
  enum class Kind { kEllipse, kRectangle };
  Kind kind = Kind::kEllipse;
  double cy = 0.0;
  double cx = 0.0;
  double ry = 0.0;
  double rx = 0.0;
};

/// Pixel (r, c) is inside when its centre (r + 0.5, c + 0.5) satisfies the
/// shape's implicit inequality.
torch::Tensor rasterize(const std::vector<SynthShape>& shapes, int64_t size);

struct SynthItem {
  Sample sample;
  std::vector<SynthShape> shapes;
};

/// Textured background with one or two shapes; the foreground fraction is
/// kept inside [0.05, 0.6].
SynthItem synth_sample(int64_t index, int64_t size, uint64_t seed);
std::vector<Sample> synth_dataset(int64_t n, int64_t size, uint64_t seed);

class Dataset {
 public:
  virtual ~Dataset() = default;
  virtual size_t size() const = 0;
  /// Raw sample (image in [0,1]).
  virtual Sample get(size_t index) const = 0;
};

class InMemoryDataset : public Dataset {
 public:
  explicit InMemoryDataset(std::vector<Sample> samples) : samples_(std::move(samples)) {}
  size_t size() const override { return samples_.size(); }
  Sample get(size_t index) const override { return samples_.at(index); }

 private:
  std::vector<Sample> samples_;
};

class FolderDataset : public Dataset {
 public:
  explicit FolderDataset(DatasetManifest manifest) : manifest_(std::move(manifest)) {}
  size_t size() const override { return manifest_.entries.size(); }
  Sample get(size_t index) const override { return load_sample(manifest_.entries.at(index)); }

 private:
  DatasetManifest manifest_;
};

struct Batch {
  torch::Tensor images;   // [B,3,S,S], normalised
  torch::Tensor sal_gt;   // [B,1,S,S]
  torch::Tensor edge_gt;  // [B,1,S,S]
  std::vector<std::string> ids;
};

/// Loads, optionally augments (per-sample seed = seed + epoch * size +
/// index) and stacks the given indices.
Batch make_batch(const Dataset& dataset, const std::vector<size_t>& indices, int64_t size,
                 bool train, uint64_t seed, int64_t epoch);

}  // namespace udcnet::data
