#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>

#include "mtcad/rng.hpp"
#include "mtcad/signal_model.hpp"
#include "test_linalg.hpp"

using namespace mtcad;

TEST_CASE("path loss at 0.25 km") {
  const double expected = 128.1 + 37.6 * std::log10(0.25);
  CHECK(path_loss_db(0.25) == doctest::Approx(expected).epsilon(1e-15));
  CHECK(path_loss_db(0.25) == doctest::Approx(105.4625).epsilon(1e-4));
}

TEST_CASE("noise power from PSD and bandwidth") {
  // -169 dBm/Hz over 10 MHz -> -99 dBm -> 10^(-12.9) W
  const double w = noise_power_watts(-169.0, 1e7);
  CHECK(w == doctest::Approx(std::pow(10.0, -12.9)).epsilon(1e-12));
  CHECK(w == doctest::Approx(1.259e-13).epsilon(1e-3));
}

TEST_CASE("power control makes p_n g_n flat at p_max g_min") {
  ScenarioConfig cfg;
  cfg.n_devices = 64;
  cfg.pilot_len = 8;
  Scenario sc = generate_scenario(cfg, 42);

  double g_min = sc.gain[0];
  int arg_min = 0;
  for (int n = 1; n < cfg.n_devices; ++n)
    if (sc.gain[n] < g_min) {
      g_min = sc.gain[n];
      arg_min = n;
    }
  const double p_max = dbm_to_watts(cfg.p_max_dbm);
  CHECK(sc.power[arg_min] == doctest::Approx(p_max).epsilon(1e-12));
  const double target = p_max * g_min;
  for (int n = 0; n < cfg.n_devices; ++n)
    CHECK(std::abs(sc.power[n] * sc.gain[n] - target) / target < 1e-12);
}

TEST_CASE("scaled pilot columns equal pilots times sqrt(p g)") {
  ScenarioConfig cfg;
  cfg.n_devices = 12;
  cfg.pilot_len = 6;
  Scenario sc = generate_scenario(cfg, 3);
  for (int n = 0; n < cfg.n_devices; ++n) {
    const double s = std::sqrt(sc.power[n] * sc.gain[n]);
    for (int i = 0; i < cfg.pilot_len; ++i) {
      CHECK(std::abs(sc.scaled_pilots.re(i, n) - sc.pilots.re(i, n) * s) < 1e-12);
      CHECK(std::abs(sc.scaled_pilots.im(i, n) - sc.pilots.im(i, n) * s) < 1e-12);
    }
  }
}

TEST_CASE("scenario and sample generation are deterministic in the seed") {
  ScenarioConfig cfg;
  cfg.n_devices = 10;
  cfg.pilot_len = 4;
  Scenario a = generate_scenario(cfg, 123);
  Scenario b = generate_scenario(cfg, 123);
  CHECK(a.scaled_pilots.equal_bytes(b.scaled_pilots));
  CHECK(a.gain == b.gain);
  CHECK(a.power == b.power);

  Sample s1 = draw_sample(a, 8, 0.2, 77, true);
  Sample s2 = draw_sample(b, 8, 0.2, 77, true);
  CHECK(s1.labels == s2.labels);
  CHECK(s1.received.equal_bytes(s2.received));
  CHECK(s1.cov.equal_bytes(s2.cov));

  Scenario c = generate_scenario(cfg, 124);
  CHECK(!a.scaled_pilots.equal_bytes(c.scaled_pilots));
}

TEST_CASE("parameter validation") {
  ScenarioConfig cfg;
  cfg.n_devices = 0;
  CHECK_THROWS_AS(generate_scenario(cfg, 1), std::invalid_argument);
  cfg.n_devices = 4;
  cfg.cell_radius_km = -1;
  CHECK_THROWS_AS(generate_scenario(cfg, 1), std::invalid_argument);
  cfg.cell_radius_km = 0.25;
  Scenario sc = generate_scenario(cfg, 1);
  CHECK_THROWS_AS(draw_sample(sc, 0, 0.1, 1), std::invalid_argument);
  CHECK_THROWS_AS(draw_sample(sc, 4, 1.5, 1), std::invalid_argument);
}

TEST_CASE("all-inactive noiseless sample is exactly zero") {
  ScenarioConfig cfg;
  cfg.n_devices = 5;
  cfg.pilot_len = 3;
  Scenario sc = generate_scenario(cfg, 9);
  sc.noise_var = 0.0;
  Sample s = draw_sample_with_labels(sc, 6, {0, 0, 0, 0, 0}, 11, true);
  CHECK(s.received.frobenius_norm() == 0.0);
  CHECK(s.cov.frobenius_norm() == 0.0);
}

TEST_CASE("single active device, noiseless: rank-one covariance") {
  ScenarioConfig cfg;
  cfg.n_devices = 1;
  cfg.pilot_len = 4;
  Scenario sc = generate_scenario(cfg, 21);
  sc.noise_var = 0.0;
  Sample s = draw_sample_with_labels(sc, 16, {1}, 5, true);

  // Y = b h^T, so C is proportional to b b^H
  double energy = 0.0;
  for (int m = 0; m < 16; ++m) {
    // recover h_m from the first pilot entry
    const std::complex<double> b0 = sc.scaled_pilots.at(0, 0);
    const std::complex<double> h = s.received.at(0, m) / b0;
    energy += std::norm(h);
    for (int i = 0; i < 4; ++i) {
      const std::complex<double> expect = sc.scaled_pilots.at(i, 0) * h;
      CHECK(std::abs(s.received.at(i, m) - expect) < 1e-10);
    }
  }
  const double scale = energy / 16.0;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      const std::complex<double> expect =
          sc.scaled_pilots.at(i, 0) * std::conj(sc.scaled_pilots.at(j, 0)) * scale;
      CHECK(std::abs(s.cov.at(i, j) - expect) < 1e-10);
    }
}

TEST_CASE("sample covariance matches the double-loop oracle") {
  Rng rng(33);
  ComplexMatrix y(4, 16);
  for (int j = 0; j < 16; ++j)
    for (int i = 0; i < 4; ++i) y.set(i, j, rng.cnormal());
  ComplexMatrix c = sample_covariance(y);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      std::complex<double> acc = 0.0;
      for (int m = 0; m < 16; ++m) acc += y.at(i, m) * std::conj(y.at(j, m));
      acc /= 16.0;
      CHECK(std::abs(c.at(i, j) - acc) < 1e-12);
    }
  CHECK(c.hermitian_defect() < 1e-12);

  // zero input and single column
  ComplexMatrix zero(3, 5);
  CHECK(sample_covariance(zero).frobenius_norm() == 0.0);
  ComplexMatrix col(3, 1);
  col.set(0, 0, {1.0, 2.0});
  col.set(1, 0, {-0.5, 0.0});
  ComplexMatrix c1 = sample_covariance(col);
  CHECK(std::abs(c1.at(0, 0) - std::complex<double>(5.0, 0.0)) < 1e-12);
  CHECK(std::abs(c1.at(0, 1) - std::complex<double>(1.0, 2.0) * std::conj(std::complex<double>(-0.5, 0.0))) < 1e-12);
}

TEST_CASE("generated covariances are Hermitian") {
  ScenarioConfig cfg;
  cfg.n_devices = 20;
  cfg.pilot_len = 7;
  Scenario sc = generate_scenario(cfg, 55);
  for (uint64_t seed = 0; seed < 20; ++seed) {
    Sample s = draw_sample(sc, 16, 0.1, seed);
    CHECK(s.cov.hermitian_defect() < 1e-12);
  }
}

TEST_CASE("empirical covariance converges to B diag(a) B^H + noise_var I") {
  ScenarioConfig cfg;
  cfg.n_devices = 10;
  cfg.pilot_len = 4;
  Scenario sc = generate_scenario(cfg, 101);
  std::vector<uint8_t> labels = {1, 0, 0, 1, 0, 0, 0, 0, 1, 0};

  const int m_antennas = 32;
  const int trials = 400;
  ComplexMatrix mean(cfg.pilot_len, cfg.pilot_len);
  for (int t = 0; t < trials; ++t) {
    Sample s = draw_sample_with_labels(sc, m_antennas, labels, split_seed(7, t));
    mean = mean + s.cov;
  }
  mean = mean.scaled(1.0 / trials);

  std::vector<double> activity(labels.begin(), labels.end());
  testutil::CMat sigma = testutil::sigma_of(activity, sc.scaled_pilots, sc.noise_var);
  ComplexMatrix sigma_m(cfg.pilot_len, cfg.pilot_len);
  double trace = 0.0;
  for (int i = 0; i < cfg.pilot_len; ++i) {
    trace += sigma[i * cfg.pilot_len + i].real();
    for (int j = 0; j < cfg.pilot_len; ++j)
      sigma_m.set(i, j, sigma[i * cfg.pilot_len + j]);
  }

  // Var[y_i conj(y_j)] = Sigma_ii Sigma_jj for circular Gaussians, so the
  // Frobenius deviation concentrates around Tr(Sigma)/sqrt(n_draws).
  const double n_draws = double(trials) * m_antennas;
  const double se = trace / std::sqrt(n_draws);
  const double dev = (mean - sigma_m).frobenius_norm();
  CHECK(dev < 3.0 * se);
  CHECK(dev > 0.0);
}

TEST_CASE("fixed-k sampling draws exactly k active devices") {
  ScenarioConfig cfg;
  cfg.n_devices = 15;
  cfg.pilot_len = 4;
  Scenario sc = generate_scenario(cfg, 5);
  for (uint64_t seed = 0; seed < 10; ++seed) {
    Sample s = draw_sample_fixed_k(sc, 4, 3, seed);
    int count = 0;
    for (uint8_t l : s.labels) count += l;
    CHECK(count == 3);
  }
  CHECK_THROWS_AS(draw_sample_fixed_k(sc, 4, 16, 0), std::invalid_argument);
}

TEST_CASE("bernoulli activity hits the requested ratio on average") {
  ScenarioConfig cfg;
  cfg.n_devices = 50;
  cfg.pilot_len = 2;
  Scenario sc = generate_scenario(cfg, 6);
  int64_t active = 0;
  const int trials = 200;
  for (int t = 0; t < trials; ++t) {
    Sample s = draw_sample(sc, 1, 0.1, split_seed(3, t));
    for (uint8_t l : s.labels) active += l;
  }
  const double rate = double(active) / (double(trials) * cfg.n_devices);
  CHECK(rate == doctest::Approx(0.1).epsilon(0.2));
}
