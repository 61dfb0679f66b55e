#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "json.hpp"
#include "support/metric_oracles.hpp"
#include "udcnet/error.hpp"
#include "udcnet/metrics.hpp"

namespace m = udcnet::metrics;
namespace oracle = udcnet::testing::metric_oracle;

namespace {

m::Map map_of(int64_t h, int64_t w, std::vector<double> v) { return m::Map(h, w, std::move(v)); }

oracle::Grid grid_of(const m::Map& x) { return oracle::to_grid(x.data, x.height, x.width); }

std::vector<oracle::Pair> random_pairs() {
  std::mt19937_64 rng(20240611);
  std::vector<oracle::Pair> out;
  for (int i = 0; i < 100; ++i) out.push_back(oracle::random_pair(rng, i % 2 ? 16 : 8, i % 2 ? 16 : 8));
  return out;
}

m::Map square_gt(int64_t n, int64_t lo, int64_t hi) {
  m::Map g(n, n);
  for (int64_t r = lo; r < hi; ++r)
    for (int64_t c = lo; c < hi; ++c) g.at(r, c) = 1.0;
  return g;
}

}  // namespace

TEST(Mae, Examples) {
  auto gt = map_of(2, 2, {1, 0, 0, 0});
  EXPECT_DOUBLE_EQ(m::mae(gt, gt), 0.0);
  EXPECT_DOUBLE_EQ(m::mae(map_of(2, 2, {1, 0, 0, 1}), gt), 0.25);
  EXPECT_DOUBLE_EQ(m::mae(m::Map(2, 2, 0.5), gt), 0.5);
  EXPECT_THROW(m::mae(m::Map(2, 3), gt), udcnet::Error);
}

TEST(Thresholds, EvenlySpaced) {
  EXPECT_EQ(m::threshold_at(0), 0.0);
  EXPECT_EQ(m::threshold_at(255), 1.0);
  EXPECT_NEAR(m::threshold_at(128) - m::threshold_at(127), 1.0 / 255.0, 1e-15);
}

TEST(FMeasure, PerfectBinaryPrediction) {
  auto gt = square_gt(8, 2, 6);
  auto f = m::f_measures(gt, gt);
  EXPECT_DOUBLE_EQ(f.f_max, 1.0);
  ASSERT_EQ(f.curve.size(), 256u);
  for (int k = 1; k < 256; ++k) EXPECT_DOUBLE_EQ(f.curve[k].f, 1.0) << k;
}

TEST(FMeasure, AllOnesAgainstQuarterForeground) {
  auto gt = square_gt(8, 0, 4);  // 16 of 64 pixels
  auto f = m::f_measures(m::Map(8, 8, 1.0), gt);
  const double expected = 1.3 * 0.25 / (0.3 * 0.25 + 1.0);
  EXPECT_NEAR(expected, 0.3023, 1e-4);
  for (const auto& pt : f.curve) {
    EXPECT_DOUBLE_EQ(pt.precision, 0.25);
    EXPECT_DOUBLE_EQ(pt.recall, 1.0);
    EXPECT_NEAR(pt.f, expected, 1e-15);
  }
  EXPECT_NEAR(f.f_avg, expected, 1e-12);  // mean of 256 values
}

TEST(FMeasure, EmptyDenominatorsGiveZero) {
  auto pt = m::threshold_point(m::Map(4, 4, 0.0), m::Map(4, 4, 0.0), 0.5);
  EXPECT_EQ(pt.precision, 0.0);
  EXPECT_EQ(pt.recall, 0.0);
  EXPECT_EQ(pt.f, 0.0);
}

TEST(FMeasure, MatchesCountingOracleOnRandomBinaryMaps) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    m::Map pred(8, 8), gt(8, 8);
    for (auto& v : pred.data) v = double(rng() % 2);
    for (auto& v : gt.data) v = double(rng() % 2);
    auto f = m::f_measures(pred, gt);
    for (int k = 0; k < 256; ++k) {
      auto want = oracle::prf(grid_of(pred), grid_of(gt), k / 255.0);
      EXPECT_EQ(f.curve[k].precision, want.p);
      EXPECT_EQ(f.curve[k].recall, want.r);
      EXPECT_EQ(f.curve[k].f, want.f);
    }
  }
}

TEST(FMeasure, RecallNeverIncreasesWithThreshold) {
  for (const auto& p : random_pairs()) {
    auto f = m::f_measures(map_of(p.h, p.w, p.pred), map_of(p.h, p.w, p.gt));
    for (int k = 1; k < 256; ++k) EXPECT_LE(f.curve[k].recall, f.curve[k - 1].recall);
  }
}

TEST(DistanceTransform, MatchesBruteForceWithColumnMajorTies) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 40; ++trial) {
    const int64_t h = 3 + trial % 7, w = 2 + trial % 9;
    m::Map gt(h, w);
    for (auto& v : gt.data) v = rng() % 5 == 0 ? 1.0 : 0.0;
    gt.at(rng() % h, rng() % w) = 1.0;
    std::vector<double> dist;
    std::vector<int64_t> nearest;
    m::distance_transform(gt, dist, nearest);
    for (int64_t r = 0; r < h; ++r)
      for (int64_t c = 0; c < w; ++c) {
        double best = 1e300;
        int64_t arg = -1;
        for (int64_t cc = 0; cc < w; ++cc)
          for (int64_t rr = 0; rr < h; ++rr) {
            if (gt.at(rr, cc) <= 0.5) continue;
            const double d = std::hypot(double(r - rr), double(c - cc));
            if (d < best) best = d, arg = rr * w + cc;
          }
        EXPECT_NEAR(dist[r * w + c], best, 1e-12);
        EXPECT_EQ(nearest[r * w + c], arg) << "trial " << trial << " at " << r << "," << c;
      }
  }
}

TEST(WeightedF, Examples) {
  auto gt = square_gt(10, 3, 7);
  EXPECT_NEAR(m::weighted_f(gt, gt), 1.0, 1e-12);
  EXPECT_NEAR(m::weighted_f(m::Map(10, 10, 0.0), gt), 0.0, 1e-12);
  EXPECT_EQ(m::weighted_f(m::Map(10, 10, 0.3), m::Map(10, 10, 0.0)), 0.0);
}

TEST(SMeasure, Examples) {
  auto gt = square_gt(12, 2, 7);
  EXPECT_NEAR(m::s_measure(gt, gt), 1.0, 1e-6);
  EXPECT_DOUBLE_EQ(m::s_measure(m::Map(6, 6, 0.0), m::Map(6, 6, 0.0)), 1.0);
  EXPECT_DOUBLE_EQ(m::s_measure(m::Map(6, 6, 1.0), m::Map(6, 6, 0.0)), 0.0);
  EXPECT_DOUBLE_EQ(m::s_measure(m::Map(6, 6, 0.7), m::Map(6, 6, 1.0)), 0.7);
}

TEST(EMeasure, Examples) {
  auto gt = square_gt(8, 1, 5);
  EXPECT_NEAR(m::e_measure_binary(gt, gt), 1.0, 1e-12);
  EXPECT_DOUBLE_EQ(m::e_measure_binary(m::Map(5, 5, 0.0), m::Map(5, 5, 0.0)), 1.0);
  m::Map complement = gt;
  for (auto& v : complement.data) v = 1.0 - v;
  EXPECT_NEAR(m::e_measure_binary(complement, gt), oracle::e_measure(grid_of(complement), grid_of(gt)), 1e-12);
  EXPECT_LT(m::e_measure_binary(complement, gt), 0.1);
}

TEST(MetricOracles, HundredRandomPairs) {
  for (const auto& p : random_pairs()) {
    auto pred = map_of(p.h, p.w, p.pred);
    auto gt = map_of(p.h, p.w, p.gt);
    auto gp = grid_of(pred), gg = grid_of(gt);
    EXPECT_NEAR(m::mae(pred, gt), oracle::mae(gp, gg), 1e-12);
    EXPECT_NEAR(m::weighted_f(pred, gt), oracle::weighted_f(gp, gg), 1e-6);
    EXPECT_NEAR(m::s_measure(pred, gt), oracle::s_measure(gp, gg), 1e-6);
    EXPECT_NEAR(m::e_measures(pred, gt).adaptive, oracle::adaptive_e_measure(gp, gg), 1e-6);
    auto f = m::f_measures(pred, gt);
    for (int k = 0; k < 256; k += 15) {
      auto want = oracle::prf(gp, gg, k / 255.0);
      EXPECT_NEAR(f.curve[k].f, want.f, 1e-12);
    }
  }
}

TEST(MetricProperties, RangesAndSymmetry) {
  for (const auto& p : random_pairs()) {
    auto pred = map_of(p.h, p.w, p.pred);
    auto gt = map_of(p.h, p.w, p.gt);
    auto r = m::evaluate(pred, gt, "x");
    for (double v : {r.mae, r.f_max, r.f_avg, r.f_adaptive, r.f_weighted, r.s_measure, r.e_measure,
                     r.e_mean, r.e_max}) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
    EXPECT_DOUBLE_EQ(m::mae(pred, gt), m::mae(gt, pred));
  }
}

TEST(MetricProperties, ExactMatchScoresOne) {
  for (const auto& p : random_pairs()) {
    auto gt = map_of(p.h, p.w, p.gt);
    const auto fg = std::count(p.gt.begin(), p.gt.end(), 1.0);
    if (fg == 0 || fg == p.h * p.w) continue;
    auto r = m::evaluate(gt, gt);
    EXPECT_EQ(r.mae, 0.0);
    EXPECT_NEAR(r.f_max, 1.0, 1e-12);
    EXPECT_NEAR(r.f_weighted, 1.0, 1e-12);
    EXPECT_NEAR(r.s_measure, 1.0, 1e-6);
    EXPECT_NEAR(r.e_measure, 1.0, 1e-12);
  }
}

TEST(Evaluate, NormalizesPredictionsFirst) {
  auto gt = square_gt(8, 2, 6);
  m::Map scaled = gt;
  for (auto& v : scaled.data) v = 0.2 + 0.3 * v;
  auto r = m::evaluate(scaled, gt);
  EXPECT_EQ(r.mae, 0.0);
  auto flat = m::normalize_minmax(m::Map(3, 3, 0.4));
  for (double v : flat.data) EXPECT_EQ(v, 0.0);
}

TEST(Aggregate, MeanOfPerImageValuesAndOrderIndependent) {
  std::vector<m::MetricReport> reports;
  for (const auto& p : random_pairs()) reports.push_back(m::evaluate(map_of(p.h, p.w, p.pred), map_of(p.h, p.w, p.gt)));
  auto agg = m::aggregate(reports);
  double mae = 0.0, s = 0.0;
  for (const auto& r : reports) mae += r.mae, s += r.s_measure;
  EXPECT_NEAR(agg.mae, mae / reports.size(), 1e-9);
  EXPECT_NEAR(agg.s_measure, s / reports.size(), 1e-9);
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 5; ++trial) {
    std::shuffle(reports.begin(), reports.end(), rng);
    auto again = m::aggregate(reports);
    EXPECT_EQ(again.mae, agg.mae);
    EXPECT_EQ(again.f_weighted, agg.f_weighted);
    EXPECT_EQ(again.curve[100].precision, agg.curve[100].precision);
  }
}

TEST(Report, JsonCarriesScalarsAndCurves) {
  auto gt = square_gt(8, 2, 6);
  auto r = m::evaluate(gt, gt, "img01");
  auto j = nlohmann::json::parse(r.to_json());
  for (const char* key : {"mae", "f_max", "f_avg", "f_weighted", "s_measure", "e_measure"}) {
    EXPECT_TRUE(j.contains(key)) << key;
  }
  EXPECT_EQ(j["id"], "img01");
  EXPECT_EQ(j["pr_curve"].size(), 256u);
  EXPECT_EQ(j["f_curve"].size(), 256u);
  EXPECT_EQ(r.to_json(-1).find('\n'), std::string::npos);
  auto csv = m::curve_csv(r);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 257);
  EXPECT_EQ(csv.rfind("threshold,precision,recall,f", 0), 0u);
}
