#include "udcnet/checkpoint.hpp"

#include <fmt/format.h>
#include <fmt/ranges.h>

#include <filesystem>

#include "udcnet/error.hpp"

namespace udcnet {

namespace {

torch::serialize::InputArchive open_archive(const std::string& path) {
  if (!std::filesystem::is_regular_file(path)) {
    throw Error("checkpoint", fmt::format("no checkpoint at '{}'", path));
  }
  torch::serialize::InputArchive archive;
  try {
    archive.load_from(path);
  } catch (const c10::Error& e) {
    throw Error("checkpoint", fmt::format("'{}' is not a checkpoint: {}", path,
                                          e.what_without_backtrace()));
  }
  c10::IValue version;
  if (!archive.try_read("format_version", version) || !version.isInt()) {
    throw Error("checkpoint", fmt::format("'{}' has no format version", path));
  }
  if (version.toInt() != kCheckpointFormat) {
    throw Error("checkpoint", fmt::format("'{}' has format {} but {} is supported", path,
                                          version.toInt(), kCheckpointFormat));
  }
  return archive;
}

RunConfig stored_config(torch::serialize::InputArchive& archive) {
  c10::IValue text;
  archive.read("config", text);
  return RunConfig::from_json(text.toStringRef());
}

}  // namespace

void save_checkpoint(const std::string& path, const RunConfig& config, UdcNetImpl& model,
                     const torch::optim::Optimizer* optimizer, const TrainState& state) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  torch::serialize::OutputArchive archive;
  archive.write("format_version", c10::IValue(kCheckpointFormat));
  archive.write("config", c10::IValue(config.to_json()));
  archive.write("state_step", c10::IValue(state.step));
  archive.write("state_best_val_mae", c10::IValue(state.best_val_mae));
  torch::serialize::OutputArchive model_archive;
  model.save(model_archive);
  archive.write("model", model_archive);
  if (optimizer != nullptr) {
    torch::serialize::OutputArchive optim_archive;
    optimizer->save(optim_archive);
    archive.write("optimizer", optim_archive);
  }
  // Write then rename so an interrupted save never leaves a torn file.
  const std::string tmp = path + ".tmp";
  archive.save_to(tmp);
  std::filesystem::rename(tmp, path);
}

RunConfig read_checkpoint_config(const std::string& path) {
  auto archive = open_archive(path);
  return stored_config(archive);
}

TrainState load_checkpoint(const std::string& path, const RunConfig& expected, UdcNetImpl& model,
                           torch::optim::Optimizer* optimizer) {
  auto archive = open_archive(path);
  const auto stored = stored_config(archive);
  if (stored.model_json() != expected.model_json()) {
    throw Error("checkpoint",
                fmt::format("'{}' was trained with a different model config: {} vs {}", path,
                            stored.model_json(), expected.model_json()));
  }
  TrainState state;
  c10::IValue v;
  archive.read("state_step", v);
  state.step = v.toInt();
  archive.read("state_best_val_mae", v);
  state.best_val_mae = v.toDouble();
  torch::serialize::InputArchive model_archive;
  archive.read("model", model_archive);
  model.load(model_archive);
  if (optimizer != nullptr) {
    torch::serialize::InputArchive optim_archive;
    if (!archive.try_read("optimizer", optim_archive)) {
      throw Error("checkpoint", fmt::format("'{}' holds no optimizer state", path));
    }
    optimizer->load(optim_archive);
  }
  return state;
}

}  // namespace udcnet
