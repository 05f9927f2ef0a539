#pragma once

#include <cstdint>
#include <vector>

#include "mtcad/complex_matrix.hpp"

namespace mtcad {

// Deployment parameters of one cell. Powers are dBm / Hz at this boundary;
// everything downstream of generate_scenario is linear scale (watts).
struct ScenarioConfig {
  int n_devices = 100;
  int pilot_len = 8;
  double cell_radius_km = 0.25;
  double p_max_dbm = 23.0;
  double noise_psd_dbm_hz = -169.0;
  double bandwidth_hz = 1e7;

  bool operator==(const ScenarioConfig&) const = default;
};

// One deployment instance: pilots, gains, controlled powers and the scaled
// pilot matrix consumed by both detectors.
struct Scenario {
  int n_devices = 0;
  int pilot_len = 0;
  ComplexMatrix pilots;         // S, pilot_len x n_devices
  std::vector<double> gain;     // large-scale channel gain, linear
  std::vector<double> power;    // transmit power, watts
  ComplexMatrix scaled_pilots;  // B = S * G^(1/2), G = diag{p_n * g_n}
  double noise_var = 0.0;       // sigma^2, watts
};

// One detection instance. The scaled pilots are copied in so samples stay
// valid independently of the scenario they came from (dataset files store
// them per sample as well).
struct Sample {
  int m_antennas = 0;
  std::vector<uint8_t> labels;  // ground-truth activity, one byte per device
  ComplexMatrix scaled_pilots;  // B, pilot_len x n_devices
  ComplexMatrix received;       // Y, pilot_len x m_antennas; empty unless kept
  ComplexMatrix cov;            // C = Y * Y^H / M, pilot_len x pilot_len
};

double path_loss_db(double distance_km);
double dbm_to_watts(double dbm);
double noise_power_watts(double psd_dbm_hz, double bandwidth_hz);

// Pilots i.i.d. CN(0,1); device positions uniform in the disk (5 m floor on
// the BS distance); gains from the path-loss law; powers from power control
// p_n = p_max * g_min / g_n. Deterministic in (config, seed).
Scenario generate_scenario(const ScenarioConfig& config, uint64_t seed);

// Activity i.i.d. Bernoulli(activity_ratio), H entries CN(0,1), noise
// CN(0, sigma^2), Y = B A H + W, C = Y Y^H / M.
Sample draw_sample(const Scenario& scenario, int m_antennas, double activity_ratio,
                   uint64_t seed, bool keep_received = false);

// Same channel/noise draw recipe with caller-chosen labels.
Sample draw_sample_with_labels(const Scenario& scenario, int m_antennas,
                               const std::vector<uint8_t>& labels, uint64_t seed,
                               bool keep_received = false);

// Exactly k active devices, uniformly chosen.
Sample draw_sample_fixed_k(const Scenario& scenario, int m_antennas, int k_active,
                           uint64_t seed, bool keep_received = false);

}  // namespace mtcad
