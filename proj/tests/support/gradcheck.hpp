#pragma once

#include <torch/torch.h>

#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace udcnet::testing {

struct GradCheckResult {
  double max_rel_error = 0.0;
  int64_t checked = 0;
  std::string worst;
};

struct GradCheckOptions {
  double eps = 1e-6;
  /// Lower bound of the relative-error denominator. Keeps round-off noise on
  /// near-zero gradients from dominating the result.
  double floor = 1e-4;
  /// When positive, at most this many evenly spaced elements per tensor are
  /// perturbed (always including the first and last).
  int64_t max_per_tensor = 0;
};

/// Central finite differences against autograd for the elements of every
/// tensor in `tensors` (which must require grad and be double precision).
/// The relative error of one element is |a - n| / max(|a|, |n|, floor).
inline GradCheckResult gradcheck(std::vector<std::pair<std::string, torch::Tensor>> tensors,
                                 const std::function<torch::Tensor()>& loss,
                                 const GradCheckOptions& opts = {}) {
  const double eps = opts.eps;
  for (auto& [_, t] : tensors) {
    if (t.grad().defined()) t.mutable_grad().zero_();
  }
  loss().backward();
  std::vector<torch::Tensor> analytic;
  for (auto& [name, t] : tensors) {
    analytic.push_back(t.grad().defined() ? t.grad().clone() : torch::zeros_like(t));
  }

  GradCheckResult result;
  torch::NoGradGuard guard;
  for (size_t i = 0; i < tensors.size(); ++i) {
    auto& t = tensors[i].second;
    auto flat = t.view({-1});
    auto grad = analytic[i].reshape({-1});
    const int64_t n = flat.numel();
    std::vector<int64_t> picks;
    if (opts.max_per_tensor <= 0 || n <= opts.max_per_tensor) {
      for (int64_t j = 0; j < n; ++j) picks.push_back(j);
    } else {
      for (int64_t k = 0; k < opts.max_per_tensor; ++k) {
        picks.push_back(k * (n - 1) / (opts.max_per_tensor - 1));
      }
    }
    for (int64_t j : picks) {
      const double original = flat[j].item<double>();
      flat[j] = original + eps;
      const double plus = loss().item<double>();
      flat[j] = original - eps;
      const double minus = loss().item<double>();
      flat[j] = original;
      const double numeric = (plus - minus) / (2.0 * eps);
      const double a = grad[j].item<double>();
      const double err = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), opts.floor});
      ++result.checked;
      if (err > result.max_rel_error) {
        result.max_rel_error = err;
        result.worst = tensors[i].first + "[" + std::to_string(j) + "] analytic=" +
                       std::to_string(a) + " numeric=" + std::to_string(numeric);
      }
    }
  }
  return result;
}

inline GradCheckResult gradcheck(torch::nn::Module& module,
                                 const std::function<torch::Tensor()>& loss,
                                 const GradCheckOptions& opts = {}) {
  std::vector<std::pair<std::string, torch::Tensor>> tensors;
  for (const auto& item : module.named_parameters(true)) {
    tensors.emplace_back(item.key(), item.value());
  }
  return gradcheck(std::move(tensors), loss, opts);
}

/// Fixed random projection of an output, turning it into a scalar loss.
inline torch::Tensor project(const torch::Tensor& out, const torch::Tensor& weights) {
  return (out * weights).sum();
}

}  // namespace udcnet::testing
