#include "mtcad/het_transformer.hpp"

#include <cmath>
#include <stdexcept>

#include "mtcad/errors.hpp"
#include "mtcad/rng.hpp"

namespace mtcad {

namespace {

Tensor uniform_weight(Rng& rng, int out, int in) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  std::vector<double> data(size_t(out) * in);
  for (auto& v : data) v = rng.uniform(-bound, bound);
  return Tensor::from_data({out, in}, std::move(data), /*requires_grad=*/true);
}

Tensor zero_bias(int d) { return Tensor::zeros({d}, /*requires_grad=*/true); }

BnBlock make_bn(int d) {
  BnBlock bn;
  bn.scale = Tensor::from_data({d}, std::vector<double>(d, 1.0), true);
  bn.shift = Tensor::zeros({d}, true);
  bn.stats = BnStats(d);
  return bn;
}

BnMode to_bn_mode(RunMode mode) {
  switch (mode) {
    case RunMode::TrainUpdate: return BnMode::Train;
    case RunMode::Train: return BnMode::TrainNoUpdate;
    default: return BnMode::Inference;
  }
}

}  // namespace

HTParams HTParams::init(const HTConfig& config, int pilot_len, uint64_t seed) {
  if (config.layers < 1 || config.d_model < 1 || config.d_attn < 1 ||
      config.heads < 1 || config.d_ff < 1 || pilot_len < 1)
    throw std::invalid_argument("HTParams: architecture sizes must be positive");
  if (config.c_clip <= 0.0)
    throw std::invalid_argument("HTParams: c_clip must be positive");

  Rng rng(seed);
  HTParams p;
  p.config = config;
  p.pilot_len = pilot_len;
  const int d = config.d_model, dp = config.d_attn, df = config.d_ff;
  const int in_dev = 2 * pilot_len;
  const int in_sig = 2 * pilot_len * pilot_len;

  p.w_in_dev = uniform_weight(rng, d, in_dev);
  p.b_in_dev = zero_bias(d);
  p.w_in_sig = uniform_weight(rng, d, in_sig);
  p.b_in_sig = zero_bias(d);

  p.encoder.resize(config.layers);
  for (auto& layer : p.encoder) {
    for (int t = 0; t < config.heads; ++t) {
      layer.wq_dev.push_back(uniform_weight(rng, dp, d));
      layer.wk_dev.push_back(uniform_weight(rng, dp, d));
      layer.wv_dev.push_back(uniform_weight(rng, dp, d));
      layer.wo_dev.push_back(uniform_weight(rng, d, dp));
      layer.wq_sig.push_back(uniform_weight(rng, dp, d));
      layer.wk_sig.push_back(uniform_weight(rng, dp, d));
      layer.wv_sig.push_back(uniform_weight(rng, dp, d));
      layer.wo_sig.push_back(uniform_weight(rng, d, dp));
    }
    layer.ff1_w_dev = uniform_weight(rng, df, d);
    layer.ff1_b_dev = zero_bias(df);
    layer.ff2_w_dev = uniform_weight(rng, d, df);
    layer.ff2_b_dev = zero_bias(d);
    layer.ff1_w_sig = uniform_weight(rng, df, d);
    layer.ff1_b_sig = zero_bias(df);
    layer.ff2_w_sig = uniform_weight(rng, d, df);
    layer.ff2_b_sig = zero_bias(d);
    layer.bn_mha_dev = make_bn(d);
    layer.bn_mha_sig = make_bn(d);
    layer.bn_ff_dev = make_bn(d);
    layer.bn_ff_sig = make_bn(d);
  }

  for (int t = 0; t < config.heads; ++t) {
    p.decoder.wq.push_back(uniform_weight(rng, dp, d));
    p.decoder.wk_dev.push_back(uniform_weight(rng, dp, d));
    p.decoder.wk_sig.push_back(uniform_weight(rng, dp, d));
    p.decoder.wv_dev.push_back(uniform_weight(rng, dp, d));
    p.decoder.wv_sig.push_back(uniform_weight(rng, dp, d));
    p.decoder.wo.push_back(uniform_weight(rng, d, dp));
  }
  p.decoder.w_out = uniform_weight(rng, d, d);
  return p;
}

std::vector<std::pair<std::string, Tensor>> HTParams::named_params() const {
  std::vector<std::pair<std::string, Tensor>> out;
  out.emplace_back("embed.B.W", w_in_dev);
  out.emplace_back("embed.B.b", b_in_dev);
  out.emplace_back("embed.Y.W", w_in_sig);
  out.emplace_back("embed.Y.b", b_in_sig);
  for (size_t l = 0; l < encoder.size(); ++l) {
    const auto& lay = encoder[l];
    const std::string pre = "enc." + std::to_string(l) + ".";
    for (int t = 0; t < config.heads; ++t) {
      const std::string ht = "." + std::to_string(t);
      out.emplace_back(pre + "mha.B.q" + ht, lay.wq_dev[t]);
      out.emplace_back(pre + "mha.B.k" + ht, lay.wk_dev[t]);
      out.emplace_back(pre + "mha.B.v" + ht, lay.wv_dev[t]);
      out.emplace_back(pre + "mha.B.o" + ht, lay.wo_dev[t]);
      out.emplace_back(pre + "mha.Y.q" + ht, lay.wq_sig[t]);
      out.emplace_back(pre + "mha.Y.k" + ht, lay.wk_sig[t]);
      out.emplace_back(pre + "mha.Y.v" + ht, lay.wv_sig[t]);
      out.emplace_back(pre + "mha.Y.o" + ht, lay.wo_sig[t]);
    }
    out.emplace_back(pre + "ff.B.W1", lay.ff1_w_dev);
    out.emplace_back(pre + "ff.B.b1", lay.ff1_b_dev);
    out.emplace_back(pre + "ff.B.W2", lay.ff2_w_dev);
    out.emplace_back(pre + "ff.B.b2", lay.ff2_b_dev);
    out.emplace_back(pre + "ff.Y.W1", lay.ff1_w_sig);
    out.emplace_back(pre + "ff.Y.b1", lay.ff1_b_sig);
    out.emplace_back(pre + "ff.Y.W2", lay.ff2_w_sig);
    out.emplace_back(pre + "ff.Y.b2", lay.ff2_b_sig);
    out.emplace_back(pre + "bn.mha.B.w", lay.bn_mha_dev.scale);
    out.emplace_back(pre + "bn.mha.B.b", lay.bn_mha_dev.shift);
    out.emplace_back(pre + "bn.mha.Y.w", lay.bn_mha_sig.scale);
    out.emplace_back(pre + "bn.mha.Y.b", lay.bn_mha_sig.shift);
    out.emplace_back(pre + "bn.ff.B.w", lay.bn_ff_dev.scale);
    out.emplace_back(pre + "bn.ff.B.b", lay.bn_ff_dev.shift);
    out.emplace_back(pre + "bn.ff.Y.w", lay.bn_ff_sig.scale);
    out.emplace_back(pre + "bn.ff.Y.b", lay.bn_ff_sig.shift);
  }
  for (int t = 0; t < config.heads; ++t) {
    const std::string ht = "." + std::to_string(t);
    out.emplace_back("dec.q" + ht, decoder.wq[t]);
    out.emplace_back("dec.k.B" + ht, decoder.wk_dev[t]);
    out.emplace_back("dec.k.Y" + ht, decoder.wk_sig[t]);
    out.emplace_back("dec.v.B" + ht, decoder.wv_dev[t]);
    out.emplace_back("dec.v.Y" + ht, decoder.wv_sig[t]);
    out.emplace_back("dec.o" + ht, decoder.wo[t]);
  }
  out.emplace_back("dec.out.W", decoder.w_out);
  return out;
}

std::vector<std::pair<std::string, std::vector<double>*>> HTParams::named_stats() {
  std::vector<std::pair<std::string, std::vector<double>*>> out;
  for (size_t l = 0; l < encoder.size(); ++l) {
    auto& lay = encoder[l];
    const std::string pre = "enc." + std::to_string(l) + ".bn.";
    out.emplace_back(pre + "mha.B.mean", &lay.bn_mha_dev.stats.mean);
    out.emplace_back(pre + "mha.B.var", &lay.bn_mha_dev.stats.var);
    out.emplace_back(pre + "mha.Y.mean", &lay.bn_mha_sig.stats.mean);
    out.emplace_back(pre + "mha.Y.var", &lay.bn_mha_sig.stats.var);
    out.emplace_back(pre + "ff.B.mean", &lay.bn_ff_dev.stats.mean);
    out.emplace_back(pre + "ff.B.var", &lay.bn_ff_dev.stats.var);
    out.emplace_back(pre + "ff.Y.mean", &lay.bn_ff_sig.stats.mean);
    out.emplace_back(pre + "ff.Y.var", &lay.bn_ff_sig.stats.var);
  }
  return out;
}

std::vector<std::pair<std::string, const std::vector<double>*>> HTParams::named_stats()
    const {
  std::vector<std::pair<std::string, const std::vector<double>*>> out;
  for (auto& [name, vec] : const_cast<HTParams*>(this)->named_stats())
    out.emplace_back(name, vec);
  return out;
}

int64_t HTParams::param_count() const {
  int64_t n = 0;
  for (const auto& [name, t] : named_params()) n += t.size();
  return n;
}

// ---------------------------------------------------------------------------

InputFeatures embed_features(const ComplexMatrix& scaled_pilots,
                             const ComplexMatrix& cov) {
  const int lp = scaled_pilots.rows();
  const int n = scaled_pilots.cols();
  if (cov.rows() != lp || cov.cols() != lp)
    throw std::invalid_argument("embed_features: covariance must be pilot_len square");
  InputFeatures f;
  f.n_devices = n;
  f.device_feats.resize(size_t(n) * 2 * lp);
  for (int dev = 0; dev < n; ++dev)
    for (int i = 0; i < lp; ++i) {
      f.device_feats[size_t(dev) * 2 * lp + i] = scaled_pilots.re(i, dev);
      f.device_feats[size_t(dev) * 2 * lp + lp + i] = scaled_pilots.im(i, dev);
    }
  // column-major vec(C) is the storage order of the planes
  f.signal_feat.reserve(size_t(2) * lp * lp);
  f.signal_feat.insert(f.signal_feat.end(), cov.real_plane().begin(),
                       cov.real_plane().end());
  f.signal_feat.insert(f.signal_feat.end(), cov.imag_plane().begin(),
                       cov.imag_plane().end());
  return f;
}

BatchInput build_batch_input(const std::vector<const Sample*>& samples) {
  if (samples.empty()) throw std::invalid_argument("build_batch_input: empty batch");
  const int n = samples[0]->scaled_pilots.cols();
  const int lp = samples[0]->scaled_pilots.rows();
  const int nb = static_cast<int>(samples.size());
  BatchInput in;
  in.batch = nb;
  in.n_devices = n;
  std::vector<double> dev(size_t(nb) * n * 2 * lp);
  std::vector<double> sig(size_t(nb) * 2 * lp * lp);
  for (int i = 0; i < nb; ++i) {
    const Sample& s = *samples[i];
    if (s.scaled_pilots.cols() != n || s.scaled_pilots.rows() != lp)
      throw std::invalid_argument("build_batch_input: inconsistent sample dims");
    InputFeatures f = embed_features(s.scaled_pilots, s.cov);

    // Condition to scale-equivariant units before the linear projection:
    // pilot features in units of the sample's pilot RMS, covariance features
    // in squared units. The detection problem is invariant to a joint
    // rescale of (B, noise), while the raw physical scales (~1e-6 pilots,
    // ~1e-11 covariances) would leave the embeddings bias-dominated.
    double sq = 0.0;
    for (double v : f.device_feats) sq += v * v;
    const double rms = std::sqrt(sq / (double(n) * lp));
    const double inv = rms > 0.0 ? 1.0 / rms : 1.0;
    for (double& v : f.device_feats) v *= inv;
    for (double& v : f.signal_feat) v *= inv * inv;

    std::copy(f.device_feats.begin(), f.device_feats.end(),
              dev.begin() + size_t(i) * n * 2 * lp);
    std::copy(f.signal_feat.begin(), f.signal_feat.end(),
              sig.begin() + size_t(i) * 2 * lp * lp);
  }
  in.device_feats = Tensor::from_data({nb, n, 2 * lp}, std::move(dev));
  in.signal_feats = Tensor::from_data({nb, 1, 2 * lp * lp}, std::move(sig));
  return in;
}

BatchInput build_batch_input(const std::vector<Sample>& samples, size_t first,
                             size_t count) {
  std::vector<const Sample*> ptrs;
  ptrs.reserve(count);
  for (size_t i = first; i < first + count && i < samples.size(); ++i)
    ptrs.push_back(&samples[i]);
  return build_batch_input(ptrs);
}

EmbeddingSet initial_embedding(Tape& tape, const BatchInput& input,
                               const HTParams& params) {
  EmbeddingSet e;
  e.devices = tape.add_bias(tape.linear(input.device_feats, params.w_in_dev),
                            params.b_in_dev);
  e.signal = tape.add_bias(tape.linear(input.signal_feats, params.w_in_sig),
                           params.b_in_sig);
  return e;
}

EmbeddingSet encoder_layer(Tape& tape, int layer, const EmbeddingSet& in,
                           HTParams& params, RunMode mode, ForwardDiag* diag) {
  if (layer < 0 || layer >= static_cast<int>(params.encoder.size()))
    throw std::invalid_argument("encoder_layer: layer index out of range");
  auto& lay = params.encoder[layer];
  const int n = in.devices.shape()[1];
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(params.config.d_attn));
  const BnMode bn = to_bn_mode(mode);

  Tensor acc_dev, acc_sig;
  for (int t = 0; t < params.config.heads; ++t) {
    Tensor q_dev = tape.linear(in.devices, lay.wq_dev[t]);
    Tensor q_sig = tape.linear(in.signal, lay.wq_sig[t]);
    Tensor keys = tape.concat_mid(tape.linear(in.devices, lay.wk_dev[t]),
                                  tape.linear(in.signal, lay.wk_sig[t]));
    Tensor vals = tape.concat_mid(tape.linear(in.devices, lay.wv_dev[t]),
                                  tape.linear(in.signal, lay.wv_sig[t]));
    Tensor sc_dev = tape.scale(tape.bmm(q_dev, keys, true), inv_sqrt);
    Tensor sc_sig = tape.scale(tape.bmm(q_sig, keys, true), inv_sqrt);
    if (!params.config.attend_self) {
      sc_dev = tape.mask_self(sc_dev, 0);
      sc_sig = tape.mask_self(sc_sig, n);
    }
    Tensor w_dev = tape.softmax_rows(sc_dev);
    Tensor w_sig = tape.softmax_rows(sc_sig);
    if (diag) {
      diag->encoder_weights.push_back(w_dev);
      diag->encoder_weights.push_back(w_sig);
    }
    Tensor att_dev = tape.linear(tape.bmm(w_dev, vals), lay.wo_dev[t]);
    Tensor att_sig = tape.linear(tape.bmm(w_sig, vals), lay.wo_sig[t]);
    acc_dev = t == 0 ? att_dev : tape.add(acc_dev, att_dev);
    acc_sig = t == 0 ? att_sig : tape.add(acc_sig, att_sig);
  }

  Tensor sub1_dev = tape.batch_norm(tape.add(in.devices, acc_dev), lay.bn_mha_dev.scale,
                                    lay.bn_mha_dev.shift, lay.bn_mha_dev.stats, bn);
  Tensor sub1_sig = tape.batch_norm(tape.add(in.signal, acc_sig), lay.bn_mha_sig.scale,
                                    lay.bn_mha_sig.shift, lay.bn_mha_sig.stats, bn);

  Tensor ff_dev = tape.add_bias(
      tape.linear(tape.relu(tape.add_bias(tape.linear(sub1_dev, lay.ff1_w_dev),
                                          lay.ff1_b_dev)),
                  lay.ff2_w_dev),
      lay.ff2_b_dev);
  Tensor ff_sig = tape.add_bias(
      tape.linear(tape.relu(tape.add_bias(tape.linear(sub1_sig, lay.ff1_w_sig),
                                          lay.ff1_b_sig)),
                  lay.ff2_w_sig),
      lay.ff2_b_sig);

  EmbeddingSet out;
  out.devices = tape.batch_norm(tape.add(sub1_dev, ff_dev), lay.bn_ff_dev.scale,
                                lay.bn_ff_dev.shift, lay.bn_ff_dev.stats, bn);
  out.signal = tape.batch_norm(tape.add(sub1_sig, ff_sig), lay.bn_ff_sig.scale,
                               lay.bn_ff_sig.shift, lay.bn_ff_sig.stats, bn);
  return out;
}

Tensor decode(Tape& tape, const EmbeddingSet& in, const HTParams& params,
              ForwardDiag* diag) {
  const auto& dec = params.decoder;
  const double inv_sqrt_attn =
      1.0 / std::sqrt(static_cast<double>(params.config.d_attn));
  Tensor context;
  for (int t = 0; t < params.config.heads; ++t) {
    Tensor q = tape.linear(in.signal, dec.wq[t]);
    Tensor keys = tape.concat_mid(tape.linear(in.devices, dec.wk_dev[t]),
                                  tape.linear(in.signal, dec.wk_sig[t]));
    Tensor vals = tape.concat_mid(tape.linear(in.devices, dec.wv_dev[t]),
                                  tape.linear(in.signal, dec.wv_sig[t]));
    Tensor weights =
        tape.softmax_rows(tape.scale(tape.bmm(q, keys, true), inv_sqrt_attn));
    if (diag) diag->decoder_weights.push_back(weights);
    Tensor att = tape.linear(tape.bmm(weights, vals), dec.wo[t]);
    context = t == 0 ? att : tape.add(context, att);
  }
  // alpha_n = c_clip * tanh(context^T W_out x_n / sqrt(d))
  Tensor projected = tape.linear(in.devices, dec.w_out);  // (Nb, N, d)
  Tensor scores = tape.bmm(context, projected, true);     // (Nb, 1, N)
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(params.config.d_model));
  Tensor alpha = tape.scale(tape.tanh(tape.scale(scores, inv_sqrt_d)),
                            params.config.c_clip);
  return tape.sigmoid(alpha);
}

Tensor ht_forward(Tape& tape, const BatchInput& input, HTParams& params,
                  RunMode mode, ForwardDiag* diag) {
  if (mode == RunMode::Inference && !params.bn_ready)
    throw state_error("ht_forward: inference requires batch-norm statistics "
                      "(train first or load a checkpoint)");
  EmbeddingSet e = initial_embedding(tape, input, params);
  for (int l = 0; l < params.config.layers; ++l)
    e = encoder_layer(tape, l, e, params, mode, diag);
  Tensor probs = decode(tape, e, params, diag);  // (Nb, 1, N)
  if (mode == RunMode::TrainUpdate) params.bn_ready = true;
  return tape.reshape(probs, {input.batch, input.n_devices});
}

std::vector<double> ht_infer(const ComplexMatrix& scaled_pilots,
                             const ComplexMatrix& cov, HTParams& params) {
  Sample s;
  s.scaled_pilots = scaled_pilots;
  s.cov = cov;
  std::vector<const Sample*> one{&s};
  Tape tape(/*recording=*/false);
  Tensor p = ht_forward(tape, build_batch_input(one), params, RunMode::Inference);
  return p.data();
}

std::vector<std::vector<double>> ht_infer_dataset(const std::vector<Sample>& samples,
                                                  HTParams& params, int batch_size) {
  std::vector<std::vector<double>> out;
  out.reserve(samples.size());
  for (size_t first = 0; first < samples.size(); first += batch_size) {
    const size_t count = std::min<size_t>(batch_size, samples.size() - first);
    Tape tape(/*recording=*/false);
    Tensor p = ht_forward(tape, build_batch_input(samples, first, count), params,
                          RunMode::Inference);
    const int n = p.shape()[1];
    for (size_t i = 0; i < count; ++i)
      out.emplace_back(p.data().begin() + i * n, p.data().begin() + (i + 1) * n);
  }
  return out;
}

}  // namespace mtcad
