#include "udcnet/trainer.hpp"

#include <fmt/format.h>
#include <fmt/ranges.h>

#include <algorithm>
#include <filesystem>
#include <numeric>
#include <random>

#include "udcnet/error.hpp"
#include "udcnet/losses.hpp"

namespace udcnet {

Trainer::Trainer(const RunConfig& config, std::shared_ptr<const data::Dataset> train,
                 std::shared_ptr<const data::Dataset> validation, std::ostream* log)
    : config_(config), train_(std::move(train)), validation_(std::move(validation)), log_(log) {
  config_.validate();
  if (!train_ || train_->size() == 0) throw Error("data", "training set is empty");
  torch::manual_seed(config_.seed);
  model_ = UdcNet(config_.model);
  optimizer_ = std::make_unique<torch::optim::Adam>(model_->parameters(),
                                                    torch::optim::AdamOptions(config_.optim.lr));
}

void Trainer::resume(const std::string& checkpoint) {
  state_ = load_checkpoint(checkpoint, config_, *model_, optimizer_.get());
}

int64_t Trainer::steps_per_epoch() const {
  const auto n = static_cast<int64_t>(train_->size());
  return (n + config_.optim.batch_size - 1) / config_.optim.batch_size;
}

double Trainer::lr_at_step(int64_t step) const {
  return step_lr(config_.optim.lr, config_.optim.decay_rate, config_.optim.decay_every_epochs,
                 step / steps_per_epoch());
}

std::vector<size_t> Trainer::epoch_order(int64_t epoch) const {
  std::vector<size_t> order(train_->size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::mt19937_64 rng(config_.seed ^ (0x9E3779B97F4A7C15ull * static_cast<uint64_t>(epoch + 1)));
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

void Trainer::save(const std::string& path) {
  save_checkpoint(path, config_, *model_, optimizer_.get(), state_);
}

void Trainer::log_step(int64_t epoch, double lr, const LossBreakdown& losses) {
  if (log_ == nullptr || state_.step % config_.log_every != 0) return;
  std::string line = fmt::format("step={} epoch={} lr={:.3g} total={:.6f} r6={:.6f}", state_.step,
                                 epoch, lr, losses.total.item<double>(),
                                 (losses.r6_bce + losses.r6_iou).item<double>());
  for (int level = 2; level <= 5; ++level) {
    line += fmt::format(" bce{}={:.6f} iou{}={:.6f} dice{}={:.6f}", level,
                        losses.bce.at(level).item<double>(), level,
                        losses.iou.at(level).item<double>(), level,
                        losses.dice.at(level).item<double>());
  }
  *log_ << line << '\n' << std::flush;
}

TrainSummary Trainer::run() {
  const int64_t spe = steps_per_epoch();
  int64_t limit = config_.optim.epochs * spe;
  if (config_.optim.max_steps > 0) limit = std::min(limit, config_.optim.max_steps);
  const auto batch = static_cast<size_t>(config_.optim.batch_size);
  const bool checkpoints = !config_.output_dir.empty();
  const std::string last_path = (std::filesystem::path(config_.output_dir) / "last.pt").string();
  const std::string best_path = (std::filesystem::path(config_.output_dir) / "best.pt").string();

  TrainSummary summary;
  bool saved_at_current = false;
  std::vector<size_t> order;
  int64_t order_epoch = -1;
  while (state_.step < limit) {
    const int64_t epoch = state_.step / spe;
    const int64_t pos = state_.step % spe;
    if (order_epoch != epoch) {
      order = epoch_order(epoch);
      order_epoch = epoch;
    }
    const size_t begin = static_cast<size_t>(pos) * batch;
    const size_t end = std::min(order.size(), begin + batch);
    std::vector<size_t> indices(order.begin() + static_cast<std::ptrdiff_t>(begin),
                                order.begin() + static_cast<std::ptrdiff_t>(end));
    auto b = data::make_batch(*train_, indices, config_.model.image_size, config_.data.augment,
                              config_.seed, epoch);

    const double lr = lr_at_step(state_.step);
    for (auto& group : optimizer_->param_groups()) {
      static_cast<torch::optim::AdamOptions&>(group.options()).lr(lr);
    }
    model_->train();
    optimizer_->zero_grad();
    auto out = model_->forward(b.images);
    auto losses = total_loss(out, b.sal_gt, b.edge_gt, config_.loss);
    if (!std::isfinite(losses.total.item<double>())) {
      throw Error("training", fmt::format("non-finite loss at step {}", state_.step));
    }
    losses.total.backward();
    optimizer_->step();
    ++state_.step;
    summary.losses.push_back(losses.total.item<double>());
    log_step(epoch, lr, losses);
    saved_at_current = false;

    if (state_.step % spe == 0) {
      if (validation_ && validation_->size() > 0) {
        const double val = mean_mae(*validation_);
        if (log_ != nullptr) *log_ << fmt::format("epoch={} val_mae={:.6f}\n", epoch, val);
        if (val < state_.best_val_mae) {
          state_.best_val_mae = val;
          if (checkpoints) {
            save(best_path);
            summary.best_checkpoint = best_path;
          }
        }
      }
      if (checkpoints) {
        save(last_path);
        saved_at_current = true;
      }
    }
  }
  if (checkpoints) {
    if (!saved_at_current) save(last_path);
    summary.last_checkpoint = last_path;
  }
  summary.steps = state_.step;
  summary.best_val_mae = state_.best_val_mae;
  return summary;
}

double Trainer::mean_mae(const data::Dataset& dataset) {
  model_->eval();
  torch::NoGradGuard guard;
  double total = 0.0;
  for (size_t i = 0; i < dataset.size(); ++i) {
    const auto raw = dataset.get(i);
    const auto ready = data::resize_normalize(raw, config_.model.image_size);
    auto out = model_->forward(ready.image.unsqueeze(0));
    auto pred = out.prediction(raw.sal_gt.size(1), raw.sal_gt.size(2)).squeeze(0);
    total += (pred - raw.sal_gt).abs().mean().item<double>();
  }
  return dataset.size() > 0 ? total / double(dataset.size()) : 0.0;
}

}  // namespace udcnet
