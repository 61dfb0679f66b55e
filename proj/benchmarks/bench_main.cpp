#include <benchmark/benchmark.h>
#include <torch/torch.h>

#include "udcnet/frequency_ops.hpp"
#include "udcnet/fsdt.hpp"
#include "udcnet/metrics.hpp"
#include "udcnet/model.hpp"

namespace {

void BM_Fft2dRoundTrip(benchmark::State& state) {
  const int64_t side = state.range(0);
  torch::manual_seed(0);
  auto x = torch::randn({1, 32, side, side});
  for (auto _ : state) {
    auto y = udcnet::freq::ifft2d(udcnet::freq::fft2d(x));
    benchmark::DoNotOptimize(y.data_ptr());
  }
  state.SetItemsProcessed(state.iterations() * x.numel());
}
BENCHMARK(BM_Fft2dRoundTrip)->Arg(16)->Arg(44)->Arg(88);

void BM_FsdtBlock(benchmark::State& state) {
  torch::NoGradGuard guard;
  torch::manual_seed(0);
  udcnet::FsdtConfig cfg;
  cfg.channels = state.range(0);
  udcnet::FsdtBlock block(64, true, cfg);
  block->eval();
  auto origin = torch::randn({1, 64, 22, 22});
  auto next = torch::randn({1, cfg.channels, 11, 11});
  for (auto _ : state) {
    auto y = block->forward(origin, next);
    benchmark::DoNotOptimize(y.data_ptr());
  }
}
BENCHMARK(BM_FsdtBlock)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_ToyForward(benchmark::State& state) {
  torch::NoGradGuard guard;
  torch::manual_seed(0);
  udcnet::UdcNetConfig cfg;
  cfg.backbone.kind = udcnet::BackboneKind::kToy;
  cfg.channels = 32;
  cfg.image_size = state.range(0);
  udcnet::UdcNet net(cfg);
  net->eval();
  auto image = torch::randn({1, 3, cfg.image_size, cfg.image_size});
  for (auto _ : state) {
    auto out = net->forward(image);
    benchmark::DoNotOptimize(out.sal_logits.at(2).data_ptr());
  }
}
BENCHMARK(BM_ToyForward)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_MetricEvaluate(benchmark::State& state) {
  const int64_t side = state.range(0);
  udcnet::metrics::Map pred(side, side);
  udcnet::metrics::Map gt(side, side);
  uint64_t s = 12345;
  for (size_t i = 0; i < pred.size(); ++i) {
    s = s * 6364136223846793005ull + 1442695040888963407ull;
    pred.data[i] = double(s >> 11) / double(1ull << 53);
    const int64_t r = int64_t(i) / side;
    const int64_t c = int64_t(i) % side;
    gt.data[i] = (r > side / 4 && r < 3 * side / 4 && c > side / 3 && c < 2 * side / 3) ? 1.0 : 0.0;
  }
  for (auto _ : state) {
    auto report = udcnet::metrics::evaluate(pred, gt);
    benchmark::DoNotOptimize(report.s_measure);
  }
}
BENCHMARK(BM_MetricEvaluate)->Arg(64)->Arg(176)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
