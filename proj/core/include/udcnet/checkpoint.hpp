#pragma once

#include <torch/torch.h>

#include <limits>
#include <string>

#include "udcnet/config.hpp"
#include "udcnet/model.hpp"

namespace udcnet {

constexpr int64_t kCheckpointFormat = 1;

struct TrainState {
  int64_t step = 0;
  double best_val_mae = std::numeric_limits<double>::infinity();
};

/// Writes format version, config snapshot, model tensors and (when given)
/// optimizer state into one archive.
void save_checkpoint(const std::string& path, const RunConfig& config, UdcNetImpl& model,
                     const torch::optim::Optimizer* optimizer, const TrainState& state);

/// Config snapshot stored in a checkpoint.
RunConfig read_checkpoint_config(const std::string& path);

/// Restores model (and optimizer when given). Throws Error("checkpoint")
/// when the stored architecture differs from `expected`.
TrainState load_checkpoint(const std::string& path, const RunConfig& expected, UdcNetImpl& model,
                           torch::optim::Optimizer* optimizer);

}  // namespace udcnet
