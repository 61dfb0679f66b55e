// Command-line front end: train, eval, infer, export-curves, count-params,
// reference and config.

#include <fmt/format.h>

#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "udcnet/config.hpp"
#include "udcnet/error.hpp"
#include "udcnet/harness.hpp"

namespace {

struct CommonOptions {
  std::string config_path;
  std::string profile = "default";
  std::optional<uint64_t> seed;
  std::vector<std::string> overrides;
  int threads = 1;
};

void add_common(CLI::App* cmd, CommonOptions& opts) {
  cmd->add_option("--config", opts.config_path, "JSON run configuration");
  cmd->add_option("--profile", opts.profile, "Base profile when no --config is given")
      ->check(CLI::IsMember({"default", "toy"}));
  cmd->add_option("--seed", opts.seed, "Override the configured seed");
  cmd->add_option("--override", opts.overrides, "key=value with a dotted key path");
  cmd->add_option("--threads", opts.threads, "Intra-op threads (1 keeps runs deterministic)")
      ->check(CLI::PositiveNumber);
}

/// Collapses a message onto one line so errors stay machine-parsable.
std::string one_line(std::string text) {
  for (auto& c : text) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  while (!text.empty() && text.back() == ' ') text.pop_back();
  return text;
}

udcnet::RunConfig resolve(const CommonOptions& opts) {
  auto cfg = opts.config_path.empty() ? udcnet::RunConfig::profile(opts.profile)
                                      : udcnet::RunConfig::load(opts.config_path);
  for (const auto& o : opts.overrides) cfg.apply_override(o);
  if (opts.seed) cfg.seed = *opts.seed;
  cfg.validate();
  torch::set_num_threads(opts.threads);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"UDCNet salient object detection for remote-sensing images"};
  app.require_subcommand(1);

  CommonOptions common;
  std::string checkpoint;
  std::string resume;
  std::string split = "test";
  std::string out_dir;
  std::string pred_dir;
  std::string image_dir;
  std::string report;
  std::string csv;
  std::string dataset;

  auto* train = app.add_subcommand("train", "Train a model");
  add_common(train, common);
  train->add_option("--resume", resume, "Checkpoint to resume from");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint or stored maps");
  add_common(eval, common);
  eval->add_option("--checkpoint", checkpoint, "Model checkpoint");
  eval->add_option("--pred-dir", pred_dir, "Evaluate 8-bit maps from this directory instead");
  eval->add_option("--split", split, "Dataset split");
  eval->add_option("--out", out_dir, "Report directory")->required();

  auto* infer = app.add_subcommand("infer", "Write saliency and edge maps");
  add_common(infer, common);
  infer->add_option("--checkpoint", checkpoint, "Model checkpoint")->required();
  infer->add_option("--images", image_dir, "Input image directory")->required();
  infer->add_option("--out", out_dir, "Output directory")->required();

  auto* curves = app.add_subcommand("export-curves", "Export PR/F curves as CSV");
  curves->add_option("--report", report, "report.json written by eval")->required();
  curves->add_option("--csv", csv, "Output CSV path")->required();

  auto* count = app.add_subcommand("count-params", "Parameter and MAC count");
  add_common(count, common);

  auto* reference = app.add_subcommand("reference", "Print published reference numbers");
  reference->add_option("dataset", dataset, "ORSSD, EORSSD or ORSI-4199")->required();

  auto* config = app.add_subcommand("config", "Print the resolved configuration");
  add_common(config, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: usage: " << one_line(e.what()) << '\n';
    return 2;
  }

  try {
    if (train->parsed()) {
      udcnet::harness::cmd_train(resolve(common), resume, std::cout);
    } else if (eval->parsed()) {
      const auto cfg = resolve(common);
      if (!pred_dir.empty()) {
        udcnet::harness::cmd_eval_maps(cfg, pred_dir, split, out_dir, std::cout);
      } else {
        udcnet::harness::cmd_eval(cfg, checkpoint, split, out_dir, std::cout);
      }
    } else if (infer->parsed()) {
      const auto n = udcnet::harness::cmd_infer(resolve(common), checkpoint, image_dir, out_dir);
      std::cout << fmt::format("wrote {} saliency and {} edge maps to {}\n", n, n, out_dir);
    } else if (curves->parsed()) {
      udcnet::harness::cmd_export_curves(report, csv);
    } else if (count->parsed()) {
      std::cout << udcnet::harness::cmd_count_params(resolve(common));
    } else if (reference->parsed()) {
      std::cout << udcnet::harness::cmd_reference(dataset);
    } else if (config->parsed()) {
      std::cout << resolve(common).to_json();
    }
  } catch (const udcnet::Error& e) {
    std::cerr << "error: " << e.code() << ": " << one_line(e.what()) << '\n';
    return 1;
  } catch (const c10::Error& e) {
    std::cerr << "error: torch: " << one_line(e.what_without_backtrace()) << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << one_line(e.what()) << '\n';
    return 1;
  }
  return 0;
}
