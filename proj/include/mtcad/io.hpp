#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mtcad/evaluation.hpp"
#include "mtcad/het_transformer.hpp"
#include "mtcad/signal_model.hpp"
#include "mtcad/training.hpp"

namespace mtcad {

// ---------------------------------------------------------------------------
// Dataset files ("MTCDS1"). Little-endian throughout.
//   magic[6] "MTCDS1", u32 version (1: C only, 2: Y kept), u32 N, u32 Lp,
//   u32 M, u64 sample_count, then per sample:
//     labels  N bytes
//     B       2*Lp*N doubles (real plane then imaginary plane, column-major)
//     C       2*Lp*Lp doubles (same convention)
//     Y       2*Lp*M doubles (version 2 only)

struct Dataset {
  int n_devices = 0, pilot_len = 0, m_antennas = 0;
  bool has_received = false;
  std::vector<Sample> samples;
};

void save_dataset(const std::string& path, const Dataset& dataset);
Dataset load_dataset(const std::string& path);

// ---------------------------------------------------------------------------
// Checkpoint files ("MTCHT1").
//   magic[6] "MTCHT1", u32 version = 1,
//   u32 layers, u32 d_model, u32 d_attn, u32 heads, u32 d_ff, f64 c_clip,
//   u32 pilot_len, u32 tensor_count, then per tensor:
//     u32 name_len, name bytes, u32 rank, u32 dims[rank], f64 data[]
// Tensors carry the trainable parameters followed by the batch-norm running
// statistics (names like "enc.3.mha.B.q.0", "enc.3.bn.mha.B.mean").

void save_checkpoint(const std::string& path, const HTParams& params);
HTParams load_checkpoint(const std::string& path);

// ---------------------------------------------------------------------------
// Experiment configuration: plain-text "key=value" with [section] headers,
// '#' comments. Unknown keys are rejected.

struct ExperimentConfig {
  ScenarioConfig scenario;
  int m_antennas = 32;
  double activity_ratio = 0.1;
  uint64_t data_seed = 2;
  int sample_count = 5000;  // gen-data default; also the test-set size

  HTConfig model;

  TrainConfig train;
  bool fresh_scenario_per_batch = true;

  int cd_passes = 10;

  bool operator==(const ExperimentConfig&) const = default;
};

std::string format_config(const ExperimentConfig& config);
ExperimentConfig parse_config(const std::string& text);
void save_config(const std::string& path, const ExperimentConfig& config);
ExperimentConfig load_config(const std::string& path);

// ---------------------------------------------------------------------------
// Text outputs: ROC curves ("xi<TAB>pm<TAB>pf" after '#' metadata) and loss
// traces ("epoch<TAB>mean_loss<TAB>lr").

void save_curve(const std::string& path, const RocCurve& curve);
RocCurve load_curve(const std::string& path);
void save_loss_trace(const std::string& path, const std::vector<EpochStat>& trace);

}  // namespace mtcad
