#include "mtcad/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

namespace mtcad {

PmPf pm_pf(const std::vector<uint8_t>& decisions, const std::vector<uint8_t>& labels) {
  if (decisions.size() != labels.size())
    throw std::invalid_argument("pm_pf: decisions/labels length mismatch");
  int64_t active = 0, inactive = 0, hits = 0, false_alarms = 0;
  for (size_t i = 0; i < labels.size(); ++i) {
    if (labels[i]) {
      ++active;
      hits += decisions[i] ? 1 : 0;
    } else {
      ++inactive;
      false_alarms += decisions[i] ? 1 : 0;
    }
  }
  if (active == 0 || inactive == 0)
    throw std::invalid_argument("pm_pf: metrics undefined without both classes");
  return {1.0 - static_cast<double>(hits) / active,
          static_cast<double>(false_alarms) / inactive};
}

RocCurve roc_sweep(const std::vector<double>& scores,
                   const std::vector<uint8_t>& labels,
                   std::vector<double> thresholds) {
  if (scores.size() != labels.size())
    throw std::invalid_argument("roc_sweep: scores/labels length mismatch");
  if (thresholds.empty()) {
    thresholds = scores;
    thresholds.push_back(0.0);
    thresholds.push_back(1.0);
    std::sort(thresholds.begin(), thresholds.end());
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()),
                     thresholds.end());
  } else if (!std::is_sorted(thresholds.begin(), thresholds.end())) {
    throw std::invalid_argument("roc_sweep: thresholds must be ascending");
  }

  // decisions are score > xi; sort active/inactive scores once, then count
  // by binary search per threshold
  std::vector<double> act, inact;
  for (size_t i = 0; i < labels.size(); ++i)
    (labels[i] ? act : inact).push_back(scores[i]);
  if (act.empty() || inact.empty())
    throw std::invalid_argument("pm_pf: metrics undefined without both classes");
  std::sort(act.begin(), act.end());
  std::sort(inact.begin(), inact.end());

  RocCurve curve;
  curve.sample_count = static_cast<int64_t>(labels.size());
  for (double xi : thresholds) {
    const auto detected =
        act.end() - std::upper_bound(act.begin(), act.end(), xi);
    const auto false_alarms =
        inact.end() - std::upper_bound(inact.begin(), inact.end(), xi);
    curve.points.push_back({xi,
                            1.0 - static_cast<double>(detected) / act.size(),
                            static_cast<double>(false_alarms) / inact.size()});
  }
  return curve;
}

OperatingPoint operating_point(const RocCurve& curve, double ratio) {
  if (curve.points.empty())
    throw std::invalid_argument("operating_point: empty curve");
  if (ratio <= 0.0) throw std::invalid_argument("operating_point: ratio must be > 0");

  auto gap = [&](const RocPoint& p) { return p.pf - ratio * p.pm; };

  for (size_t i = 0; i + 1 < curve.points.size(); ++i) {
    const double g0 = gap(curve.points[i]);
    const double g1 = gap(curve.points[i + 1]);
    if (g0 >= 0.0 && g1 <= 0.0) {
      const double span = g0 - g1;
      const double t = span > 0.0 ? g0 / span : 0.0;
      const auto& a = curve.points[i];
      const auto& b = curve.points[i + 1];
      return {a.xi + t * (b.xi - a.xi), a.pm + t * (b.pm - a.pm),
              a.pf + t * (b.pf - a.pf), true};
    }
  }
  // no crossing: report the point nearest to the locus
  size_t best = 0;
  double best_gap = std::abs(gap(curve.points[0]));
  for (size_t i = 1; i < curve.points.size(); ++i) {
    const double g = std::abs(gap(curve.points[i]));
    if (g < best_gap) {
      best_gap = g;
      best = i;
    }
  }
  const auto& p = curve.points[best];
  return {p.xi, p.pm, p.pf, false};
}

BenchResult bench_time(const std::function<void()>& run_all, int64_t sample_count,
                       int reps, int warmup) {
  if (sample_count < 1 || reps < 1)
    throw std::invalid_argument("bench_time: need samples and reps");
  using clock = std::chrono::steady_clock;
  for (int i = 0; i < warmup; ++i) run_all();
  std::vector<double> per_rep(reps);
  double total = 0.0;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = clock::now();
    run_all();
    const auto t1 = clock::now();
    const double s = std::chrono::duration<double>(t1 - t0).count();
    per_rep[r] = s / static_cast<double>(sample_count);
    total += s;
  }
  std::sort(per_rep.begin(), per_rep.end());
  const double median = reps % 2 ? per_rep[reps / 2]
                                 : 0.5 * (per_rep[reps / 2 - 1] + per_rep[reps / 2]);
  return {total / (static_cast<double>(sample_count) * reps), median, sample_count,
          reps, warmup};
}

}  // namespace mtcad
