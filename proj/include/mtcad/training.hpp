#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mtcad/het_transformer.hpp"
#include "mtcad/signal_model.hpp"
#include "mtcad/tensor.hpp"

namespace mtcad {

// How training batches are sampled.
struct SamplingConfig {
  ScenarioConfig scenario;
  int m_antennas = 32;
  double activity_ratio = 0.1;
  // fresh pilots/placements per batch when true, one scenario for the whole
  // run otherwise
  bool fresh_scenario_per_batch = true;
};

struct TrainConfig {
  int epochs = 100;
  int steps_per_epoch = 5000;
  int batch_size = 256;
  double lr = 1e-4;
  std::vector<int> decay_epochs = {90, 97};  // lr *= decay_factor after these
  double decay_factor = 0.1;
  uint64_t seed = 1;

  bool operator==(const TrainConfig&) const = default;
};

// Class-weighted binary cross-entropy, averaged over the batch:
//   (2/N) * sum_n [ (1-kappa) * label * -log p  +  kappa * (1-label) * -log(1-p) ]
// with kappa the expected activity ratio. Probabilities at 0 or 1 are
// clamped to [1e-12, 1-1e-12] before the log.
Tensor weighted_bce_loss(Tape& tape, const Tensor& probs,
                         const std::vector<uint8_t>& labels, double activity_ratio);

// Adam moments for one parameter tensor.
struct AdamSlot {
  std::vector<double> m, v;
};

// Bias-corrected Adam update; step_index starts at 1.
void adam_step(std::vector<double>& value, const std::vector<double>& grad,
               AdamSlot& slot, int64_t step_index, double lr, double beta1 = 0.9,
               double beta2 = 0.999, double eps = 1e-8);

struct AdamState {
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  int64_t step_index = 0;
  std::vector<AdamSlot> slots;

  void step(const std::vector<std::pair<std::string, Tensor>>& params, double lr);
};

struct EpochStat {
  int epoch = 0;        // 1-based
  double mean_loss = 0;
  double lr = 0;        // rate used during this epoch
};

struct TrainResult {
  std::vector<EpochStat> trace;
};

// Algorithm: per step, draw a fresh batch, forward in train-batch mode,
// weighted cross-entropy, backward, Adam; learning rate multiplied by
// decay_factor after each configured epoch. Deterministic given the seed.
TrainResult train(HTParams& params, const TrainConfig& config,
                  const SamplingConfig& sampling,
                  const std::function<void(const EpochStat&)>& on_epoch = {});

// Fixed-dataset variant for regression tests: batches cycle through the
// given samples in order.
TrainResult train_fixed(HTParams& params, const TrainConfig& config,
                        const std::vector<Sample>& samples, double activity_ratio,
                        const std::function<void(const EpochStat&)>& on_epoch = {});

}  // namespace mtcad
