#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace udcnet::metrics {

/// Row-major single-channel map of doubles.
struct Map {
  int64_t height = 0;
  int64_t width = 0;
  std::vector<double> data;

  Map() = default;
  Map(int64_t h, int64_t w, double fill = 0.0);
  Map(int64_t h, int64_t w, std::vector<double> values);

  double& at(int64_t r, int64_t c) { return data[static_cast<size_t>(r * width + c)]; }
  double at(int64_t r, int64_t c) const { return data[static_cast<size_t>(r * width + c)]; }
  size_t size() const { return data.size(); }
};

constexpr int kThresholds = 256;
constexpr double kBetaSquared = 0.3;

/// Threshold k / 255 for k in [0, 255].
double threshold_at(int k);

/// Maps pred linearly onto [0, 1]; a constant map becomes all zeros.
Map normalize_minmax(const Map& pred);

double mae(const Map& pred, const Map& gt);

struct ThresholdPoint {
  double threshold = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f = 0.0;
};

struct FMeasures {
  double f_max = 0.0;
  double f_avg = 0.0;
  /// F at the adaptive threshold min(2 * mean(pred), 1).
  double f_adaptive = 0.0;
  std::vector<ThresholdPoint> curve;
};

/// Pixel counts of pred >= threshold against gt > 0.5.
ThresholdPoint threshold_point(const Map& pred, const Map& gt, double threshold);
FMeasures f_measures(const Map& pred, const Map& gt);

/// Weighted F-measure with beta^2 = 1. Zero when gt has no foreground.
double weighted_f(const Map& pred, const Map& gt);

/// Exact Euclidean distance transform to the nearest gt foreground pixel.
/// `nearest` receives the flat index of that pixel; among equidistant
/// candidates the one with the smallest column, then smallest row, wins.
void distance_transform(const Map& gt, std::vector<double>& dist, std::vector<int64_t>& nearest);

double s_measure(const Map& pred, const Map& gt);

struct EMeasures {
  double adaptive = 0.0;
  double mean = 0.0;
  double max = 0.0;
};

/// Enhanced alignment of a binary map against gt.
double e_measure_binary(const Map& binary, const Map& gt);
EMeasures e_measures(const Map& pred, const Map& gt);

struct MetricReport {
  std::string id;
  double mae = 0.0;
  double f_max = 0.0;
  double f_avg = 0.0;
  double f_adaptive = 0.0;
  double f_weighted = 0.0;
  double s_measure = 0.0;
  double e_measure = 0.0;  // adaptive threshold
  double e_mean = 0.0;
  double e_max = 0.0;
  std::vector<ThresholdPoint> curve;

  /// JSON with the scalars plus pr_curve and f_curve; indent < 0 gives a
  /// single line.
  std::string to_json(int indent = 2) const;
};

/// Min-max normalises pred and evaluates every metric. Throws
/// Error("shape_mismatch") on differing sizes.
MetricReport evaluate(const Map& pred, const Map& gt, std::string id = {});

/// Order-independent mean of per-image reports (scalars and curves).
MetricReport aggregate(const std::vector<MetricReport>& reports, std::string id = "aggregate");

/// CSV columns threshold,precision,recall,f.
std::string curve_csv(const MetricReport& report);

}  // namespace udcnet::metrics
