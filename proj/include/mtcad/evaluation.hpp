#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace mtcad {

struct PmPf {
  double pm = 0.0;  // missed detection
  double pf = 0.0;  // false alarm
};

// Pooled over everything passed in:
//   PM = 1 - sum(a * label) / sum(label)
//   PF = sum(a * (1-label)) / sum(1-label)
PmPf pm_pf(const std::vector<uint8_t>& decisions, const std::vector<uint8_t>& labels);

struct RocPoint {
  double xi = 0.0, pm = 0.0, pf = 0.0;
};

struct RocCurve {
  std::string detector;
  int64_t sample_count = 0;
  int n_devices = 0, pilot_len = 0, m_antennas = 0;
  std::vector<RocPoint> points;  // xi ascending
};

// One pooled PM/PF evaluation per threshold (strict-greater decisions).
// An empty threshold list means the exact empirical grid: every distinct
// score plus 0 and 1.
RocCurve roc_sweep(const std::vector<double>& scores,
                   const std::vector<uint8_t>& labels,
                   std::vector<double> thresholds = {});

struct OperatingPoint {
  double xi = 0.0, pm = 0.0, pf = 0.0;
  bool crossed = false;  // false: no crossing, nearest point reported
};

// Solves PF = ratio * PM on the curve by linear interpolation between
// adjacent sweep points (ratio 1 or 2 in practice).
OperatingPoint operating_point(const RocCurve& curve, double ratio);

struct BenchResult {
  double mean_per_sample_s = 0.0;
  double median_per_sample_s = 0.0;  // median over repetitions
  int64_t samples = 0;
  int reps = 0;
  int warmup = 0;
};

// Wall-clock timing of `run_all` (which must process the whole sample set
// once per call): `warmup` untimed calls, then `reps` timed ones, monotonic
// clock, single-threaded caller.
BenchResult bench_time(const std::function<void()>& run_all, int64_t sample_count,
                       int reps, int warmup = 2);

}  // namespace mtcad
