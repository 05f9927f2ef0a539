#include "mtcad/training.hpp"

#include <cmath>
#include <stdexcept>

#include "mtcad/errors.hpp"
#include "mtcad/rng.hpp"

namespace mtcad {

Tensor weighted_bce_loss(Tape& tape, const Tensor& probs,
                         const std::vector<uint8_t>& labels, double activity_ratio) {
  if (probs.rank() != 2)
    throw std::invalid_argument("weighted_bce_loss: probs must be (batch, devices)");
  const int nb = probs.shape()[0];
  const int n = probs.shape()[1];
  if (static_cast<int64_t>(labels.size()) != probs.size())
    throw std::invalid_argument("weighted_bce_loss: labels length mismatch");
  if (activity_ratio < 0.0 || activity_ratio > 1.0)
    throw std::invalid_argument("weighted_bce_loss: activity_ratio in [0,1]");

  std::vector<double> pos(labels.size()), neg(labels.size()), one(labels.size(), 1.0);
  for (size_t i = 0; i < labels.size(); ++i) {
    pos[i] = labels[i] ? 1.0 : 0.0;
    neg[i] = labels[i] ? 0.0 : 1.0;
  }
  Tensor pos_mask = Tensor::from_data(probs.shape(), std::move(pos));
  Tensor neg_mask = Tensor::from_data(probs.shape(), std::move(neg));
  Tensor ones = Tensor::from_data(probs.shape(), std::move(one));

  Tensor log_p = tape.log_floored(probs);
  Tensor log_q = tape.log_floored(tape.sub(ones, probs));
  Tensor active_term = tape.sum_all(tape.mul(pos_mask, log_p));
  Tensor inactive_term = tape.sum_all(tape.mul(neg_mask, log_q));
  const double w = 2.0 / (static_cast<double>(n) * nb);
  return tape.add(tape.scale(active_term, -(1.0 - activity_ratio) * w),
                  tape.scale(inactive_term, -activity_ratio * w));
}

void adam_step(std::vector<double>& value, const std::vector<double>& grad,
               AdamSlot& slot, int64_t step_index, double lr, double beta1,
               double beta2, double eps) {
  if (grad.size() != value.size())
    throw std::invalid_argument("adam_step: gradient size mismatch");
  if (slot.m.size() != value.size()) {
    slot.m.assign(value.size(), 0.0);
    slot.v.assign(value.size(), 0.0);
  }
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step_index));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step_index));
  for (size_t i = 0; i < value.size(); ++i) {
    slot.m[i] = beta1 * slot.m[i] + (1.0 - beta1) * grad[i];
    slot.v[i] = beta2 * slot.v[i] + (1.0 - beta2) * grad[i] * grad[i];
    const double mhat = slot.m[i] / c1;
    const double vhat = slot.v[i] / c2;
    value[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

void AdamState::step(const std::vector<std::pair<std::string, Tensor>>& params,
                     double lr) {
  if (slots.size() != params.size()) slots.resize(params.size());
  ++step_index;
  for (size_t i = 0; i < params.size(); ++i) {
    Tensor t = params[i].second;
    adam_step(t.data(), t.grad(), slots[i], step_index, lr, beta1, beta2, eps);
  }
}

namespace {

struct BatchLabels {
  std::vector<uint8_t> flat;  // batch-major
};

double run_step(HTParams& params, AdamState& opt, const std::vector<Sample>& batch,
                double activity_ratio, double lr, uint64_t step_seed) {
  const int nb = static_cast<int>(batch.size());
  const int n = batch[0].scaled_pilots.cols();
  std::vector<uint8_t> labels(size_t(nb) * n);
  for (int i = 0; i < nb; ++i)
    std::copy(batch[i].labels.begin(), batch[i].labels.end(),
              labels.begin() + size_t(i) * n);

  Tape tape;
  BatchInput input = build_batch_input(batch, 0, batch.size());
  Tensor probs = ht_forward(tape, input, params, RunMode::TrainUpdate);
  Tensor loss = weighted_bce_loss(tape, probs, labels, activity_ratio);
  const double loss_value = loss.item();
  if (!std::isfinite(loss_value))
    throw numeric_error("train: non-finite loss at step seed " +
                        std::to_string(step_seed));
  tape.backward(loss);
  opt.step(params.named_params(), lr);
  return loss_value;
}

TrainResult run_epochs(HTParams& params, const TrainConfig& config,
                       const std::function<std::vector<Sample>(uint64_t)>& make_batch,
                       double activity_ratio,
                       const std::function<void(const EpochStat&)>& on_epoch) {
  if (config.epochs < 1 || config.steps_per_epoch < 1 || config.batch_size < 1)
    throw std::invalid_argument("train: epochs, steps and batch size must be >= 1");
  if (config.decay_factor <= 0.0 || config.decay_factor > 1.0)
    throw std::invalid_argument("train: decay factor in (0,1]");
  for (int e : config.decay_epochs)
    if (e < 1 || e > config.epochs)
      throw std::invalid_argument("train: decay epoch outside schedule");

  AdamState opt;
  TrainResult result;
  double lr = config.lr;
  uint64_t step_counter = 0;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    double loss_sum = 0.0;
    for (int step = 0; step < config.steps_per_epoch; ++step, ++step_counter) {
      const uint64_t step_seed = split_seed(config.seed, step_counter);
      loss_sum += run_step(params, opt, make_batch(step_seed), activity_ratio, lr,
                           step_seed);
    }
    EpochStat stat{epoch, loss_sum / config.steps_per_epoch, lr};
    result.trace.push_back(stat);
    if (on_epoch) on_epoch(stat);
    for (int e : config.decay_epochs)
      if (epoch == e) lr *= config.decay_factor;
  }
  return result;
}

}  // namespace

TrainResult train(HTParams& params, const TrainConfig& config,
                  const SamplingConfig& sampling,
                  const std::function<void(const EpochStat&)>& on_epoch) {
  Scenario fixed;
  if (!sampling.fresh_scenario_per_batch)
    fixed = generate_scenario(sampling.scenario, split_seed(config.seed, ~0ULL));

  auto make_batch = [&](uint64_t step_seed) {
    std::vector<Sample> batch;
    batch.reserve(config.batch_size);
    const Scenario scenario = sampling.fresh_scenario_per_batch
                                  ? generate_scenario(sampling.scenario,
                                                      split_seed(step_seed, 0))
                                  : fixed;
    for (int i = 0; i < config.batch_size; ++i)
      batch.push_back(draw_sample(scenario, sampling.m_antennas,
                                  sampling.activity_ratio,
                                  split_seed(step_seed, 1 + i)));
    return batch;
  };
  return run_epochs(params, config, make_batch, sampling.activity_ratio, on_epoch);
}

TrainResult train_fixed(HTParams& params, const TrainConfig& config,
                        const std::vector<Sample>& samples, double activity_ratio,
                        const std::function<void(const EpochStat&)>& on_epoch) {
  if (samples.empty()) throw std::invalid_argument("train_fixed: empty dataset");
  size_t cursor = 0;
  auto make_batch = [&](uint64_t) {
    std::vector<Sample> batch;
    batch.reserve(config.batch_size);
    for (int i = 0; i < config.batch_size; ++i) {
      batch.push_back(samples[cursor]);
      cursor = (cursor + 1) % samples.size();
    }
    return batch;
  };
  return run_epochs(params, config, make_batch, activity_ratio, on_epoch);
}

}  // namespace mtcad
