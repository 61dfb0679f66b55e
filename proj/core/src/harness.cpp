#include "udcnet/harness.hpp"

#include <fmt/format.h>
#include <fmt/ranges.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <opencv2/imgcodecs.hpp>

#include "json.hpp"
#include "udcnet/checkpoint.hpp"
#include "udcnet/error.hpp"
#include "udcnet/reference.hpp"

namespace udcnet::harness {

namespace fs = std::filesystem;

namespace {

std::vector<data::Sample> synthetic_split(const RunConfig& config, const std::string& split) {
  // Train and test draws use disjoint seeds so the test images are unseen.
  const uint64_t offset = split == config.data.train_split ? 0 : 7919;
  return data::synth_dataset(config.data.synthetic_samples, config.model.image_size,
                             config.seed + offset);
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("io", fmt::format("cannot write '{}'", path.string()));
  out << text;
}

void write_png(const fs::path& path, const torch::Tensor& map01) {
  auto bytes = (map01.squeeze().clamp(0.0, 1.0) * 255.0).round().to(torch::kUInt8).contiguous();
  cv::Mat mat(static_cast<int>(bytes.size(0)), static_cast<int>(bytes.size(1)), CV_8UC1,
              bytes.data_ptr());
  fs::create_directories(path.parent_path());
  if (!cv::imwrite(path.string(), mat)) {
    throw Error("io", fmt::format("cannot write '{}'", path.string()));
  }
}

torch::Tensor minmax(const torch::Tensor& t) {
  const auto lo = t.min();
  const auto range = t.max() - lo;
  return range.item<double>() > 0.0 ? (t - lo) / range : torch::zeros_like(t);
}

}  // namespace

TrainingSets training_sets(const RunConfig& config) {
  TrainingSets sets;
  if (config.data.synthetic_samples > 0) {
    sets.train =
        std::make_shared<data::InMemoryDataset>(synthetic_split(config, config.data.train_split));
    return sets;
  }
  if (config.data.root.empty()) {
    throw Error("invalid_config", "data.root is empty and data.synthetic_samples is 0");
  }
  auto manifest = data::load_manifest(config.data.root, config.data.train_split);
  if (!config.data.val_split.empty()) {
    sets.train = std::make_shared<data::FolderDataset>(manifest);
    sets.validation = std::make_shared<data::FolderDataset>(
        data::load_manifest(config.data.root, config.data.val_split));
  } else {
    auto [train, val] = data::split_holdout(manifest, config.data.holdout_fraction);
    sets.train = std::make_shared<data::FolderDataset>(train);
    sets.validation = std::make_shared<data::FolderDataset>(val);
  }
  // Touch the first sample so unreadable data fails before training starts.
  sets.train->get(0);
  return sets;
}

std::shared_ptr<const data::Dataset> evaluation_set(const RunConfig& config,
                                                    const std::string& split) {
  if (config.data.synthetic_samples > 0) {
    return std::make_shared<data::InMemoryDataset>(synthetic_split(config, split));
  }
  return std::make_shared<data::FolderDataset>(data::load_manifest(config.data.root, split));
}

UdcNet load_model(const RunConfig& config, const std::string& checkpoint) {
  if (checkpoint.empty()) throw Error("invalid_argument", "a checkpoint path is required");
  auto model_config = config.model;
  model_config.backbone.weights.clear();
  UdcNet model(model_config);
  load_checkpoint(checkpoint, config, *model, nullptr);
  model->eval();
  return model;
}

metrics::Map to_map(const torch::Tensor& t) {
  auto d = t.squeeze().to(torch::kFloat64).contiguous();
  if (d.dim() != 2) throw Error("shape_mismatch", "expected a single-channel map");
  const auto* p = d.data_ptr<double>();
  return metrics::Map(d.size(0), d.size(1), std::vector<double>(p, p + d.numel()));
}

TrainSummary cmd_train(const RunConfig& config, const std::string& resume, std::ostream& log) {
  auto sets = training_sets(config);
  Trainer trainer(config, sets.train, sets.validation, &log);
  if (!resume.empty()) trainer.resume(resume);
  if (!config.output_dir.empty()) write_text(fs::path(config.output_dir) / "config.json", config.to_json());
  auto summary = trainer.run();
  log << fmt::format("done steps={} train_mae={:.6f}\n", summary.steps,
                     trainer.mean_mae(*sets.train));
  return summary;
}

metrics::MetricReport write_reports(const std::vector<metrics::MetricReport>& per_image,
                                    const std::string& out_dir) {
  auto agg = metrics::aggregate(per_image);
  if (!out_dir.empty()) {
    std::string lines;
    for (const auto& r : per_image) {
      auto scalars = r;
      scalars.curve.clear();
      lines += scalars.to_json(-1) + "\n";
    }
    write_text(fs::path(out_dir) / "per_image.jsonl", lines);
    write_text(fs::path(out_dir) / "report.json", agg.to_json() + "\n");
    write_text(fs::path(out_dir) / "curves.csv", metrics::curve_csv(agg));
  }
  return agg;
}

metrics::MetricReport cmd_eval(const RunConfig& config, const std::string& checkpoint,
                               const std::string& split, const std::string& out_dir,
                               std::ostream& log) {
  auto dataset = evaluation_set(config, split);
  auto model = load_model(config, checkpoint);
  torch::NoGradGuard guard;
  std::vector<metrics::MetricReport> reports;
  for (size_t i = 0; i < dataset->size(); ++i) {
    const auto raw = dataset->get(i);
    const auto ready = data::resize_normalize(raw, config.model.image_size);
    auto pred = model->forward(ready.image.unsqueeze(0)).prediction(raw.sal_gt.size(1),
                                                                     raw.sal_gt.size(2));
    reports.push_back(metrics::evaluate(to_map(pred), to_map(raw.sal_gt), raw.id));
  }
  auto agg = write_reports(reports, out_dir);
  log << fmt::format("images={} mae={:.4f} f_max={:.4f} f_avg={:.4f} f_w={:.4f} s_m={:.4f} e_m={:.4f}\n",
                     reports.size(), agg.mae, agg.f_max, agg.f_avg, agg.f_weighted, agg.s_measure,
                     agg.e_measure);
  return agg;
}

metrics::MetricReport cmd_eval_maps(const RunConfig& config, const std::string& pred_dir,
                                    const std::string& split, const std::string& out_dir,
                                    std::ostream& log) {
  auto dataset = evaluation_set(config, split);
  std::map<std::string, std::string> preds;
  for (const auto& p : data::list_images(pred_dir)) preds[fs::path(p).stem().string()] = p;
  std::vector<metrics::MetricReport> reports;
  for (size_t i = 0; i < dataset->size(); ++i) {
    const auto raw = dataset->get(i);
    auto it = preds.find(raw.id);
    if (it == preds.end()) {
      throw Error("data", fmt::format("no prediction for '{}' in '{}'", raw.id, pred_dir));
    }
    cv::Mat gray = cv::imread(it->second, cv::IMREAD_GRAYSCALE);
    if (gray.empty()) throw Error("data", fmt::format("cannot read '{}'", it->second));
    auto t = torch::from_blob(gray.data, {gray.rows, gray.cols}, torch::kUInt8)
                 .to(torch::kFloat64)
                 .div(255.0);
    reports.push_back(metrics::evaluate(to_map(t), to_map(raw.sal_gt), raw.id));
  }
  auto agg = write_reports(reports, out_dir);
  log << fmt::format("images={} mae={:.4f} f_max={:.4f} s_m={:.4f} e_m={:.4f}\n", reports.size(),
                     agg.mae, agg.f_max, agg.s_measure, agg.e_measure);
  return agg;
}

size_t cmd_infer(const RunConfig& config, const std::string& checkpoint,
                 const std::string& image_dir, const std::string& out_dir) {
  const auto images = data::list_images(image_dir);
  auto model = load_model(config, checkpoint);
  torch::NoGradGuard guard;
  for (const auto& path : images) {
    auto image = data::read_image(path);
    const int64_t h = image.size(1);
    const int64_t w = image.size(2);
    data::Sample s;
    s.image = image;
    s.sal_gt = torch::zeros({1, h, w});
    auto ready = data::resize_normalize(s, config.model.image_size);
    auto out = model->forward(ready.image.unsqueeze(0));
    const auto stem = fs::path(path).stem().string() + ".png";
    write_png(fs::path(out_dir) / "saliency" / stem, minmax(out.prediction(h, w)));
    write_png(fs::path(out_dir) / "edge" / stem, minmax(out.edge_prediction(h, w)));
  }
  return images.size();
}

void cmd_export_curves(const std::string& report_json, const std::string& csv_path) {
  std::ifstream in(report_json);
  if (!in) throw Error("io", fmt::format("cannot read '{}'", report_json));
  metrics::MetricReport report;
  try {
    const auto j = nlohmann::json::parse(in);
    const auto& pr = j.at("pr_curve");
    const auto& fc = j.at("f_curve");
    if (pr.size() != fc.size()) throw Error("io", "pr_curve and f_curve differ in length");
    for (size_t k = 0; k < pr.size(); ++k) {
      report.curve.push_back({metrics::threshold_at(static_cast<int>(k)), pr[k].at(0).get<double>(),
                              pr[k].at(1).get<double>(), fc[k].get<double>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error("io", fmt::format("malformed report '{}': {}", report_json, e.what()));
  }
  write_text(csv_path, metrics::curve_csv(report));
}

std::string cmd_count_params(const RunConfig& config) {
  const auto cap = count_params_flops(config.model);
  return fmt::format("backbone={} channels={} image={} params={} ({:.2f} M) macs={} ({:.2f} G)\n",
                     to_string(config.model.backbone.kind), config.model.channels,
                     config.model.image_size, cap.params, double(cap.params) / 1e6, cap.macs,
                     double(cap.macs) / 1e9);
}

std::string cmd_reference(const std::string& dataset) {
  return format_reference(load_reference_table(), dataset);
}

}  // namespace udcnet::harness
