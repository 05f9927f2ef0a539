#include "mtcad/signal_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "mtcad/rng.hpp"

namespace mtcad {

namespace {
constexpr double kMinDistanceKm = 0.005;  // keeps the path-loss law finite
}

double path_loss_db(double distance_km) {
  return 128.1 + 37.6 * std::log10(distance_km);
}

double dbm_to_watts(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }

double noise_power_watts(double psd_dbm_hz, double bandwidth_hz) {
  return dbm_to_watts(psd_dbm_hz + 10.0 * std::log10(bandwidth_hz));
}

Scenario generate_scenario(const ScenarioConfig& config, uint64_t seed) {
  if (config.n_devices < 1 || config.pilot_len < 1)
    throw std::invalid_argument("generate_scenario: n_devices and pilot_len must be >= 1");
  if (config.cell_radius_km <= 0.0)
    throw std::invalid_argument("generate_scenario: cell radius must be positive");

  Rng rng(seed);
  Scenario sc;
  sc.n_devices = config.n_devices;
  sc.pilot_len = config.pilot_len;
  sc.noise_var = noise_power_watts(config.noise_psd_dbm_hz, config.bandwidth_hz);

  sc.pilots = ComplexMatrix(config.pilot_len, config.n_devices);
  for (int n = 0; n < config.n_devices; ++n)
    for (int i = 0; i < config.pilot_len; ++i) sc.pilots.set(i, n, rng.cnormal());

  sc.gain.resize(config.n_devices);
  for (int n = 0; n < config.n_devices; ++n) {
    // uniform over the disk: r = R * sqrt(u)
    const double r =
        std::max(config.cell_radius_km * std::sqrt(rng.uniform()), kMinDistanceKm);
    rng.uniform();  // angle drawn for stream stability, irrelevant to the gain
    sc.gain[n] = std::pow(10.0, -path_loss_db(r) / 10.0);
  }

  const double g_min = *std::min_element(sc.gain.begin(), sc.gain.end());
  const double p_max = dbm_to_watts(config.p_max_dbm);
  sc.power.resize(config.n_devices);
  for (int n = 0; n < config.n_devices; ++n) sc.power[n] = p_max * g_min / sc.gain[n];

  sc.scaled_pilots = ComplexMatrix(config.pilot_len, config.n_devices);
  for (int n = 0; n < config.n_devices; ++n) {
    const double s = std::sqrt(sc.power[n] * sc.gain[n]);
    for (int i = 0; i < config.pilot_len; ++i) {
      sc.scaled_pilots.re(i, n) = sc.pilots.re(i, n) * s;
      sc.scaled_pilots.im(i, n) = sc.pilots.im(i, n) * s;
    }
  }
  return sc;
}

namespace {

Sample assemble(const Scenario& scenario, int m_antennas,
                std::vector<uint8_t> labels, Rng& rng, bool keep_received) {
  const int n = scenario.n_devices;
  const int lp = scenario.pilot_len;
  Sample s;
  s.m_antennas = m_antennas;
  s.labels = std::move(labels);
  s.scaled_pilots = scenario.scaled_pilots;

  // Y = B A H + W, accumulated column-by-column over active devices
  ComplexMatrix y(lp, m_antennas);
  const double w_std = std::sqrt(scenario.noise_var);
  for (int m = 0; m < m_antennas; ++m) {
    for (int dev = 0; dev < n; ++dev) {
      const auto h = rng.cnormal();
      if (!s.labels[dev]) continue;
      for (int i = 0; i < lp; ++i) {
        const double br = s.scaled_pilots.re(i, dev), bi = s.scaled_pilots.im(i, dev);
        y.re(i, m) += br * h.real() - bi * h.imag();
        y.im(i, m) += br * h.imag() + bi * h.real();
      }
    }
    for (int i = 0; i < lp; ++i) {
      const auto w = rng.cnormal();
      y.re(i, m) += w_std * w.real();
      y.im(i, m) += w_std * w.imag();
    }
  }
  s.cov = sample_covariance(y);
  if (keep_received) s.received = std::move(y);
  return s;
}

}  // namespace

Sample draw_sample(const Scenario& scenario, int m_antennas, double activity_ratio,
                   uint64_t seed, bool keep_received) {
  if (m_antennas < 1) throw std::invalid_argument("draw_sample: m_antennas must be >= 1");
  if (activity_ratio < 0.0 || activity_ratio > 1.0)
    throw std::invalid_argument("draw_sample: activity_ratio must be in [0,1]");
  Rng rng(seed);
  std::vector<uint8_t> labels(scenario.n_devices);
  for (auto& l : labels) l = rng.bernoulli(activity_ratio) ? 1 : 0;
  return assemble(scenario, m_antennas, std::move(labels), rng, keep_received);
}

Sample draw_sample_with_labels(const Scenario& scenario, int m_antennas,
                               const std::vector<uint8_t>& labels, uint64_t seed,
                               bool keep_received) {
  if (m_antennas < 1) throw std::invalid_argument("draw_sample: m_antennas must be >= 1");
  if (static_cast<int>(labels.size()) != scenario.n_devices)
    throw std::invalid_argument("draw_sample: labels length must equal n_devices");
  Rng rng(seed);
  return assemble(scenario, m_antennas, labels, rng, keep_received);
}

Sample draw_sample_fixed_k(const Scenario& scenario, int m_antennas, int k_active,
                           uint64_t seed, bool keep_received) {
  if (k_active < 0 || k_active > scenario.n_devices)
    throw std::invalid_argument("draw_sample: k_active out of range");
  Rng rng(seed);
  std::vector<int> order(scenario.n_devices);
  std::iota(order.begin(), order.end(), 0);
  for (int i = scenario.n_devices - 1; i > 0; --i)
    std::swap(order[i], order[rng.uniform_int(i + 1)]);
  std::vector<uint8_t> labels(scenario.n_devices, 0);
  for (int i = 0; i < k_active; ++i) labels[order[i]] = 1;
  return assemble(scenario, m_antennas, std::move(labels), rng, keep_received);
}

}  // namespace mtcad
