#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mtcad/complex_matrix.hpp"
#include "mtcad/signal_model.hpp"
#include "mtcad/tensor.hpp"

namespace mtcad {

// Architecture hyperparameters. Parameter shapes depend on these and the
// pilot length only, never on the number of devices or antennas.
struct HTConfig {
  int layers = 5;      // encoding layers
  int d_model = 128;   // embedding size
  int d_attn = 32;     // attention-space size per head
  int heads = 8;
  int d_ff = 512;      // feed-forward hidden size
  double c_clip = 10.0;  // output-compatibility scale
  // Attention lets every component score itself by default; disabling it
  // masks the self term in the encoder (the decoder query is unaffected).
  bool attend_self = true;

  bool operator==(const HTConfig&) const = default;
};

struct BnBlock {
  Tensor scale, shift;
  BnStats stats;
};

struct EncoderLayerParams {
  // one entry per head
  std::vector<Tensor> wq_dev, wk_dev, wv_dev, wo_dev;
  std::vector<Tensor> wq_sig, wk_sig, wv_sig, wo_sig;
  Tensor ff1_w_dev, ff1_b_dev, ff2_w_dev, ff2_b_dev;
  Tensor ff1_w_sig, ff1_b_sig, ff2_w_sig, ff2_b_sig;
  BnBlock bn_mha_dev, bn_mha_sig, bn_ff_dev, bn_ff_sig;
};

struct DecoderParams {
  std::vector<Tensor> wq, wk_dev, wk_sig, wv_dev, wv_sig, wo;
  Tensor w_out;
};

// All learnable weights plus batch-norm running statistics.
struct HTParams {
  HTConfig config;
  int pilot_len = 0;
  Tensor w_in_dev, b_in_dev;  // device-pilot embedding, d x 2Lp
  Tensor w_in_sig, b_in_sig;  // received-signal embedding, d x 2Lp^2
  std::vector<EncoderLayerParams> encoder;
  DecoderParams decoder;
  bool bn_ready = false;  // running statistics valid for inference

  // Uniform fan-in init for weights, zeros for biases, identity batch norm.
  static HTParams init(const HTConfig& config, int pilot_len, uint64_t seed);

  // Stable (name, tensor) listing of the trainable parameters; names follow
  // the checkpoint scheme (e.g. "enc.3.mha.B.q.0").
  std::vector<std::pair<std::string, Tensor>> named_params() const;
  // Running statistics, serialized alongside the parameters.
  std::vector<std::pair<std::string, std::vector<double>*>> named_stats();
  std::vector<std::pair<std::string, const std::vector<double>*>> named_stats() const;
  int64_t param_count() const;
};

// Real input features of one sample: device features are rows of
// [Re(b_n); Im(b_n)], the signal feature is [Re(vec(C)); Im(vec(C))]
// with column-major vectorization.
struct InputFeatures {
  int n_devices = 0;
  std::vector<double> device_feats;  // n_devices x 2Lp, row-major
  std::vector<double> signal_feat;   // 2Lp^2
};

InputFeatures embed_features(const ComplexMatrix& scaled_pilots,
                             const ComplexMatrix& cov);

// Features of a whole batch as constant tensors: (Nb, N, 2Lp) and (Nb, 1, 2Lp^2).
struct BatchInput {
  Tensor device_feats;
  Tensor signal_feats;
  int batch = 0;
  int n_devices = 0;
};

BatchInput build_batch_input(const std::vector<const Sample*>& samples);
BatchInput build_batch_input(const std::vector<Sample>& samples, size_t first,
                             size_t count);

// Device/signal representations after a layer: (Nb, N, d) and (Nb, 1, d).
struct EmbeddingSet {
  Tensor devices;
  Tensor signal;
};

enum class RunMode {
  TrainUpdate,  // batch statistics, running averages updated
  Train,        // batch statistics, running averages untouched
  Inference,    // frozen running statistics
};

// Optional per-forward visibility into the attention weights.
struct ForwardDiag {
  std::vector<Tensor> encoder_weights;  // softmax outputs per (layer, head, query group)
  std::vector<Tensor> decoder_weights;  // per head
};

EmbeddingSet initial_embedding(Tape& tape, const BatchInput& input,
                               const HTParams& params);
EmbeddingSet encoder_layer(Tape& tape, int layer, const EmbeddingSet& in,
                           HTParams& params, RunMode mode,
                           ForwardDiag* diag = nullptr);
// context-attention decoder -> per-device active probabilities (Nb, 1, N)
Tensor decode(Tape& tape, const EmbeddingSet& in, const HTParams& params,
              ForwardDiag* diag = nullptr);

// Full pass: features -> initial embedding -> L encoder layers -> decoder.
// Returns probabilities (Nb, N).
Tensor ht_forward(Tape& tape, const BatchInput& input, HTParams& params,
                  RunMode mode, ForwardDiag* diag = nullptr);

// Single-sample inference convenience.
std::vector<double> ht_infer(const ComplexMatrix& scaled_pilots,
                             const ComplexMatrix& cov, HTParams& params);

// Batched inference over a dataset; returns one probability row per sample.
std::vector<std::vector<double>> ht_infer_dataset(const std::vector<Sample>& samples,
                                                  HTParams& params,
                                                  int batch_size = 128);

}  // namespace mtcad
