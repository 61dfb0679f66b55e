#pragma once

#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "udcnet/config.hpp"
#include "udcnet/data.hpp"
#include "udcnet/metrics.hpp"
#include "udcnet/model.hpp"
#include "udcnet/trainer.hpp"

namespace udcnet::harness {

struct TrainingSets {
  std::shared_ptr<const data::Dataset> train;
  std::shared_ptr<const data::Dataset> validation;
};

/// Synthetic data when data.synthetic_samples > 0, otherwise the folder
/// splits under data.root (with a hashed holdout when no val_split is set).
/// Fails before any training when the data cannot be read.
TrainingSets training_sets(const RunConfig& config);
std::shared_ptr<const data::Dataset> evaluation_set(const RunConfig& config,
                                                    const std::string& split);

/// Builds the model and restores `checkpoint`; the encoder weight file is
/// not read because the checkpoint already holds those tensors.
UdcNet load_model(const RunConfig& config, const std::string& checkpoint);

/// Converts a [1,H,W] or [H,W] tensor to a metric map.
metrics::Map to_map(const torch::Tensor& t);

TrainSummary cmd_train(const RunConfig& config, const std::string& resume, std::ostream& log);

/// Writes per_image.jsonl, report.json and curves.csv to `out_dir`.
metrics::MetricReport write_reports(const std::vector<metrics::MetricReport>& per_image,
                                    const std::string& out_dir);

/// Runs the model on `split` and evaluates the level-2 saliency maps.
metrics::MetricReport cmd_eval(const RunConfig& config, const std::string& checkpoint,
                               const std::string& split, const std::string& out_dir,
                               std::ostream& log);

/// Evaluates stored 8-bit maps in `pred_dir` (matched by stem) against
/// the masks of `split`.
metrics::MetricReport cmd_eval_maps(const RunConfig& config, const std::string& pred_dir,
                                    const std::string& split, const std::string& out_dir,
                                    std::ostream& log);

/// Writes <out_dir>/saliency/<stem>.png and <out_dir>/edge/<stem>.png for
/// every image in `image_dir`. Returns the number of images processed.
size_t cmd_infer(const RunConfig& config, const std::string& checkpoint,
                 const std::string& image_dir, const std::string& out_dir);

/// Converts a report.json into threshold,precision,recall,f CSV.
void cmd_export_curves(const std::string& report_json, const std::string& csv_path);

std::string cmd_count_params(const RunConfig& config);

std::string cmd_reference(const std::string& dataset);

}  // namespace udcnet::harness
