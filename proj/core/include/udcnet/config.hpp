#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "udcnet/losses.hpp"
#include "udcnet/model.hpp"

namespace udcnet {

struct OptimConfig {
  /// Only "adam" is supported.
  std::string optimizer = "adam";
  double lr = 1e-4;
  double decay_rate = 0.1;
  int64_t decay_every_epochs = 60;
  int64_t epochs = 180;
  int64_t batch_size = 40;
  /// Stop after this many optimizer steps; 0 means no limit.
  int64_t max_steps = 0;
};

struct DataConfig {
  std::string root;
  std::string train_split = "train";
  std::string test_split = "test";
  /// Empty: hold out `holdout_fraction` of the training pairs.
  std::string val_split;
  double holdout_fraction = 0.1;
  bool augment = true;
  /// When positive, train and test on generated data of this many samples
  /// instead of reading `root`.
  int64_t synthetic_samples = 0;
};

struct RunConfig {
  UdcNetConfig model;
  LossConfig loss;
  OptimConfig optim;
  DataConfig data;
  uint64_t seed = 42;
  std::string output_dir = "runs/udcnet";
  int64_t log_every = 1;

  /// Training setup of the reference recipe.
  static RunConfig defaults();
  /// Small CPU profile: toy encoder, 32 channels, 64 px.
  static RunConfig toy();
  /// "default" or "toy".
  static RunConfig profile(const std::string& name);

  /// Strict parse: unknown keys and wrong types raise Error("invalid_config").
  /// Missing keys keep the defaults.
  static RunConfig from_json(const std::string& text);
  static RunConfig load(const std::string& path);
  /// Pretty-printed JSON with a trailing newline; stable key order.
  std::string to_json() const;
  /// JSON of the architecture only, used to match checkpoints.
  std::string model_json() const;

  /// `key=value` with a dotted key path, e.g. `optim.lr=0.001` or
  /// `model.dse.dilations=[1,2,3,4]`. Values are parsed as JSON, falling
  /// back to a plain string.
  void apply_override(const std::string& assignment);

  void validate() const;
};

/// Learning rate for `epoch` under step decay.
double step_lr(double base_lr, double decay_rate, int64_t decay_every, int64_t epoch);

}  // namespace udcnet
