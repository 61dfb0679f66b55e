#include "udcnet/metrics.hpp"

#include <fmt/format.h>
#include <fmt/ranges.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include "json.hpp"

#include "udcnet/error.hpp"

namespace udcnet::metrics {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

void check_pair(const Map& pred, const Map& gt) {
  if (pred.height != gt.height || pred.width != gt.width) {
    throw Error("shape_mismatch", fmt::format("prediction {}x{} vs ground truth {}x{}",
                                              pred.height, pred.width, gt.height, gt.width));
  }
  if (pred.size() == 0) throw Error("invalid_input", "empty map");
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double f_score(double precision, double recall, double beta2) {
  const double denom = beta2 * precision + recall;
  return denom > 0.0 ? (1.0 + beta2) * precision * recall / denom : 0.0;
}

double adaptive_threshold(const Map& pred) { return std::min(2.0 * mean_of(pred.data), 1.0); }

}  // namespace

Map::Map(int64_t h, int64_t w, double fill)
    : height(h), width(w), data(static_cast<size_t>(h * w), fill) {}

Map::Map(int64_t h, int64_t w, std::vector<double> values)
    : height(h), width(w), data(std::move(values)) {
  if (static_cast<int64_t>(data.size()) != h * w) {
    throw Error("shape_mismatch", fmt::format("{} values for a {}x{} map", data.size(), h, w));
  }
}

double threshold_at(int k) { return static_cast<double>(k) / 255.0; }

Map normalize_minmax(const Map& pred) {
  Map out = pred;
  if (pred.size() == 0) return out;
  const auto [lo, hi] = std::minmax_element(pred.data.begin(), pred.data.end());
  const double range = *hi - *lo;
  for (auto& v : out.data) v = range > 0.0 ? (v - *lo) / range : 0.0;
  return out;
}

double mae(const Map& pred, const Map& gt) {
  check_pair(pred, gt);
  double s = 0.0;
  for (size_t i = 0; i < pred.size(); ++i) s += std::abs(pred.data[i] - gt.data[i]);
  return s / static_cast<double>(pred.size());
}

ThresholdPoint threshold_point(const Map& pred, const Map& gt, double threshold) {
  check_pair(pred, gt);
  int64_t tp = 0;
  int64_t fp = 0;
  int64_t fn = 0;
  for (size_t i = 0; i < pred.size(); ++i) {
    const bool p = pred.data[i] >= threshold;
    const bool g = gt.data[i] > 0.5;
    tp += p && g;
    fp += p && !g;
    fn += !p && g;
  }
  ThresholdPoint pt;
  pt.threshold = threshold;
  pt.precision = tp + fp > 0 ? double(tp) / double(tp + fp) : 0.0;
  pt.recall = tp + fn > 0 ? double(tp) / double(tp + fn) : 0.0;
  pt.f = f_score(pt.precision, pt.recall, kBetaSquared);
  return pt;
}

FMeasures f_measures(const Map& pred, const Map& gt) {
  check_pair(pred, gt);
  FMeasures out;
  out.curve.reserve(kThresholds);
  double sum = 0.0;
  for (int k = 0; k < kThresholds; ++k) {
    out.curve.push_back(threshold_point(pred, gt, threshold_at(k)));
    out.f_max = std::max(out.f_max, out.curve.back().f);
    sum += out.curve.back().f;
  }
  out.f_avg = sum / kThresholds;
  out.f_adaptive = threshold_point(pred, gt, adaptive_threshold(pred)).f;
  return out;
}

void distance_transform(const Map& gt, std::vector<double>& dist, std::vector<int64_t>& nearest) {
  const int64_t h = gt.height;
  const int64_t w = gt.width;
  const double inf = std::numeric_limits<double>::infinity();
  // Nearest foreground row within each column (smaller row on ties).
  std::vector<int64_t> col_row(static_cast<size_t>(h * w), -1);
  for (int64_t c = 0; c < w; ++c) {
    int64_t last = -1;
    for (int64_t r = 0; r < h; ++r) {
      if (gt.at(r, c) > 0.5) last = r;
      col_row[r * w + c] = last;
    }
    int64_t below = -1;
    for (int64_t r = h - 1; r >= 0; --r) {
      if (gt.at(r, c) > 0.5) below = r;
      const int64_t above = col_row[r * w + c];
      if (below >= 0 && (above < 0 || below - r < r - above)) col_row[r * w + c] = below;
    }
  }
  dist.assign(static_cast<size_t>(h * w), inf);
  nearest.assign(static_cast<size_t>(h * w), -1);
  for (int64_t r = 0; r < h; ++r) {
    for (int64_t c = 0; c < w; ++c) {
      double best = inf;
      int64_t arg = -1;
      for (int64_t cc = 0; cc < w; ++cc) {
        const int64_t rr = col_row[r * w + cc];
        if (rr < 0) continue;
        const double d2 = double((r - rr) * (r - rr) + (c - cc) * (c - cc));
        if (d2 < best) {
          best = d2;
          arg = rr * w + cc;
        }
      }
      dist[r * w + c] = std::sqrt(best);
      nearest[r * w + c] = arg;
    }
  }
}

double weighted_f(const Map& pred, const Map& gt) {
  check_pair(pred, gt);
  const int64_t h = gt.height;
  const int64_t w = gt.width;
  const size_t n = gt.size();
  std::vector<bool> fg(n);
  bool any = false;
  for (size_t i = 0; i < n; ++i) any |= (fg[i] = gt.data[i] > 0.5);
  if (!any) return 0.0;

  std::vector<double> err(n);
  for (size_t i = 0; i < n; ++i) err[i] = std::abs(pred.data[i] - (fg[i] ? 1.0 : 0.0));

  std::vector<double> dist;
  std::vector<int64_t> nearest;
  distance_transform(gt, dist, nearest);
  std::vector<double> et = err;
  for (size_t i = 0; i < n; ++i) {
    if (!fg[i]) et[i] = err[static_cast<size_t>(nearest[i])];
  }

  // 7x7 Gaussian, sigma 5, normalised to unit sum; zero padding.
  constexpr int kRadius = 3;
  double kernel[2 * kRadius + 1][2 * kRadius + 1];
  double ksum = 0.0;
  for (int dy = -kRadius; dy <= kRadius; ++dy) {
    for (int dx = -kRadius; dx <= kRadius; ++dx) {
      const double v = std::exp(-(dx * dx + dy * dy) / (2.0 * 25.0));
      kernel[dy + kRadius][dx + kRadius] = v;
      ksum += v;
    }
  }
  std::vector<double> ea(n, 0.0);
  for (int64_t r = 0; r < h; ++r) {
    for (int64_t c = 0; c < w; ++c) {
      double acc = 0.0;
      for (int dy = -kRadius; dy <= kRadius; ++dy) {
        const int64_t rr = r + dy;
        if (rr < 0 || rr >= h) continue;
        for (int dx = -kRadius; dx <= kRadius; ++dx) {
          const int64_t cc = c + dx;
          if (cc < 0 || cc >= w) continue;
          acc += kernel[dy + kRadius][dx + kRadius] / ksum * et[rr * w + cc];
        }
      }
      ea[r * w + c] = acc;
    }
  }

  double fg_count = 0.0;
  double ew_fg = 0.0;
  double ew_bg = 0.0;
  for (size_t i = 0; i < n; ++i) {
    double e = err[i];
    if (fg[i] && ea[i] < e) e = ea[i];
    if (fg[i]) {
      ew_fg += e;
      fg_count += 1.0;
    } else {
      ew_bg += e * (2.0 - std::exp(std::log(0.5) / 5.0 * dist[i]));
    }
  }
  const double tpw = fg_count - ew_fg;
  const double recall = 1.0 - ew_fg / fg_count;
  const double precision = tpw / (kEps + tpw + ew_bg);
  return 2.0 * recall * precision / (kEps + recall + precision);
}

namespace {

double object_score(const std::vector<double>& values) {
  const double n = static_cast<double>(values.size());
  if (values.empty()) return 0.0;
  const double x = mean_of(values);
  double var = 0.0;
  for (double v : values) var += (v - x) * (v - x);
  const double sigma = values.size() > 1 ? std::sqrt(var / (n - 1.0)) : 0.0;
  return 2.0 * x / (x * x + 1.0 + sigma + kEps);
}

double ssim(const Map& pred, const Map& gt, int64_t r0, int64_t r1, int64_t c0, int64_t c1) {
  const double n = double((r1 - r0) * (c1 - c0));
  if (n <= 0) return 0.0;
  double x = 0.0;
  double y = 0.0;
  for (int64_t r = r0; r < r1; ++r) {
    for (int64_t c = c0; c < c1; ++c) {
      x += pred.at(r, c);
      y += gt.at(r, c);
    }
  }
  x /= n;
  y /= n;
  double sx = 0.0;
  double sy = 0.0;
  double sxy = 0.0;
  for (int64_t r = r0; r < r1; ++r) {
    for (int64_t c = c0; c < c1; ++c) {
      const double a = pred.at(r, c) - x;
      const double b = gt.at(r, c) - y;
      sx += a * a;
      sy += b * b;
      sxy += a * b;
    }
  }
  sx /= (n - 1.0 + kEps);
  sy /= (n - 1.0 + kEps);
  sxy /= (n - 1.0 + kEps);
  const double alpha = 4.0 * x * y * sxy;
  const double beta = (x * x + y * y) * (sx + sy);
  if (alpha != 0.0) return alpha / (beta + kEps);
  return beta == 0.0 ? 1.0 : 0.0;
}

}  // namespace

double s_measure(const Map& pred, const Map& gt_raw) {
  check_pair(pred, gt_raw);
  const int64_t h = gt_raw.height;
  const int64_t w = gt_raw.width;
  Map gt(h, w);
  double fg_sum = 0.0;
  for (size_t i = 0; i < gt.size(); ++i) fg_sum += (gt.data[i] = gt_raw.data[i] > 0.5 ? 1.0 : 0.0);
  const double u = fg_sum / static_cast<double>(gt.size());
  if (fg_sum == 0.0) return 1.0 - mean_of(pred.data);
  if (u == 1.0) return mean_of(pred.data);

  std::vector<double> fg_vals;
  std::vector<double> bg_vals;
  for (size_t i = 0; i < gt.size(); ++i) {
    if (gt.data[i] > 0.5) {
      fg_vals.push_back(pred.data[i]);
    } else {
      bg_vals.push_back(1.0 - pred.data[i]);
    }
  }
  const double s_object = u * object_score(fg_vals) + (1.0 - u) * object_score(bg_vals);

  // Centroid in 1-based coordinates, rounded half away from zero.
  double sum_r = 0.0;
  double sum_c = 0.0;
  for (int64_t r = 0; r < h; ++r) {
    for (int64_t c = 0; c < w; ++c) {
      if (gt.at(r, c) > 0.5) {
        sum_r += double(r + 1);
        sum_c += double(c + 1);
      }
    }
  }
  const auto cy = static_cast<int64_t>(std::round(sum_r / fg_sum));
  const auto cx = static_cast<int64_t>(std::round(sum_c / fg_sum));
  const double area = double(h * w);
  const double w1 = double(cx * cy) / area;
  const double w2 = double((w - cx) * cy) / area;
  const double w3 = double(cx * (h - cy)) / area;
  const double w4 = 1.0 - w1 - w2 - w3;
  const double s_region = w1 * ssim(pred, gt, 0, cy, 0, cx) + w2 * ssim(pred, gt, 0, cy, cx, w) +
                          w3 * ssim(pred, gt, cy, h, 0, cx) + w4 * ssim(pred, gt, cy, h, cx, w);
  return std::max(0.0, 0.5 * s_object + 0.5 * s_region);
}

double e_measure_binary(const Map& binary, const Map& gt) {
  check_pair(binary, gt);
  const size_t n = gt.size();
  double fg = 0.0;
  for (double g : gt.data) fg += g > 0.5 ? 1.0 : 0.0;
  double total = 0.0;
  if (fg == 0.0) {
    for (double b : binary.data) total += 1.0 - b;
  } else if (fg == double(n)) {
    for (double b : binary.data) total += b;
  } else {
    const double mu_b = mean_of(binary.data);
    const double mu_g = fg / double(n);
    for (size_t i = 0; i < n; ++i) {
      const double a = binary.data[i] - mu_b;
      const double g = (gt.data[i] > 0.5 ? 1.0 : 0.0) - mu_g;
      const double align = 2.0 * a * g / (a * a + g * g + kEps);
      total += (align + 1.0) * (align + 1.0) / 4.0;
    }
  }
  return total / double(n);
}

EMeasures e_measures(const Map& pred, const Map& gt) {
  check_pair(pred, gt);
  auto binarize = [&](double t) {
    Map b(pred.height, pred.width);
    for (size_t i = 0; i < pred.size(); ++i) b.data[i] = pred.data[i] >= t ? 1.0 : 0.0;
    return b;
  };
  EMeasures out;
  out.adaptive = e_measure_binary(binarize(adaptive_threshold(pred)), gt);
  double sum = 0.0;
  for (int k = 0; k < kThresholds; ++k) {
    const double e = e_measure_binary(binarize(threshold_at(k)), gt);
    sum += e;
    out.max = std::max(out.max, e);
  }
  out.mean = sum / kThresholds;
  return out;
}

MetricReport evaluate(const Map& pred_raw, const Map& gt, std::string id) {
  check_pair(pred_raw, gt);
  const Map pred = normalize_minmax(pred_raw);
  MetricReport r;
  r.id = std::move(id);
  r.mae = mae(pred, gt);
  auto f = f_measures(pred, gt);
  r.f_max = f.f_max;
  r.f_avg = f.f_avg;
  r.f_adaptive = f.f_adaptive;
  r.curve = std::move(f.curve);
  r.f_weighted = weighted_f(pred, gt);
  r.s_measure = s_measure(pred, gt);
  auto e = e_measures(pred, gt);
  r.e_measure = e.adaptive;
  r.e_mean = e.mean;
  r.e_max = e.max;
  return r;
}

namespace {

// Sorting before summation makes the mean independent of report order.
double sorted_mean(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  return mean_of(values);
}

}  // namespace

MetricReport aggregate(const std::vector<MetricReport>& reports, std::string id) {
  MetricReport out;
  out.id = std::move(id);
  if (reports.empty()) return out;
  auto field = [&](double MetricReport::*member) {
    std::vector<double> v;
    v.reserve(reports.size());
    for (const auto& r : reports) v.push_back(r.*member);
    return sorted_mean(std::move(v));
  };
  out.mae = field(&MetricReport::mae);
  out.f_max = field(&MetricReport::f_max);
  out.f_avg = field(&MetricReport::f_avg);
  out.f_adaptive = field(&MetricReport::f_adaptive);
  out.f_weighted = field(&MetricReport::f_weighted);
  out.s_measure = field(&MetricReport::s_measure);
  out.e_measure = field(&MetricReport::e_measure);
  out.e_mean = field(&MetricReport::e_mean);
  out.e_max = field(&MetricReport::e_max);
  out.curve.resize(kThresholds);
  for (int k = 0; k < kThresholds; ++k) {
    std::vector<double> p;
    std::vector<double> rc;
    std::vector<double> f;
    for (const auto& r : reports) {
      p.push_back(r.curve.at(k).precision);
      rc.push_back(r.curve.at(k).recall);
      f.push_back(r.curve.at(k).f);
    }
    out.curve[k] = {threshold_at(k), sorted_mean(std::move(p)), sorted_mean(std::move(rc)),
                    sorted_mean(std::move(f))};
  }
  return out;
}

std::string MetricReport::to_json(int indent) const {
  nlohmann::json j;
  j["id"] = id;
  j["mae"] = mae;
  j["f_max"] = f_max;
  j["f_avg"] = f_avg;
  j["f_adaptive"] = f_adaptive;
  j["f_weighted"] = f_weighted;
  j["s_measure"] = s_measure;
  j["e_measure"] = e_measure;
  j["e_mean"] = e_mean;
  j["e_max"] = e_max;
  auto& pr = j["pr_curve"] = nlohmann::json::array();
  auto& fc = j["f_curve"] = nlohmann::json::array();
  for (const auto& pt : curve) {
    pr.push_back({pt.precision, pt.recall});
    fc.push_back(pt.f);
  }
  return j.dump(indent);
}

std::string curve_csv(const MetricReport& report) {
  std::string out = "threshold,precision,recall,f\n";
  for (const auto& pt : report.curve) {
    out += fmt::format("{:.6f},{:.9f},{:.9f},{:.9f}\n", pt.threshold, pt.precision, pt.recall, pt.f);
  }
  return out;
}

}  // namespace udcnet::metrics
