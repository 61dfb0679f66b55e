#pragma once

#include <torch/torch.h>

#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "udcnet/checkpoint.hpp"
#include "udcnet/config.hpp"
#include "udcnet/data.hpp"
#include "udcnet/model.hpp"

namespace udcnet {

struct TrainSummary {
  int64_t steps = 0;
  /// Total loss of every step run by this call.
  std::vector<double> losses;
  double best_val_mae = 0.0;
  std::string last_checkpoint;
  std::string best_checkpoint;
};

/// Adam with step decay over epochs. Checkpoints go to
/// `<output_dir>/last.pt` after every epoch and when stopping, and to
/// `<output_dir>/best.pt` whenever validation MAE improves. An empty
/// output_dir disables checkpoints.
class Trainer {
 public:
  Trainer(const RunConfig& config, std::shared_ptr<const data::Dataset> train,
          std::shared_ptr<const data::Dataset> validation = nullptr, std::ostream* log = nullptr);

  /// Restores model, optimizer and step counter.
  void resume(const std::string& checkpoint);

  /// Trains until the epoch budget or optim.max_steps is exhausted.
  TrainSummary run();

  /// Mean absolute error of the final prediction against each sample's
  /// mask at its own resolution.
  double mean_mae(const data::Dataset& dataset);

  int64_t steps_per_epoch() const;
  double lr_at_step(int64_t step) const;

  UdcNet& model() { return model_; }
  const TrainState& state() const { return state_; }
  void save(const std::string& path);

 private:
  std::vector<size_t> epoch_order(int64_t epoch) const;
  void log_step(int64_t epoch, double lr, const LossBreakdown& losses);

  RunConfig config_;
  std::shared_ptr<const data::Dataset> train_;
  std::shared_ptr<const data::Dataset> validation_;
  std::ostream* log_;
  UdcNet model_{nullptr};
  std::unique_ptr<torch::optim::Adam> optimizer_;
  TrainState state_;
};

}  // namespace udcnet
