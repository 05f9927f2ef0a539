// Command-line driver: gen-data / train / eval / bench.
//
// Exit codes: 0 success, 1 usage, 2 I/O, 3 numeric abort, 4 incompatibility.

#include <CLI11.hpp>

#include <cstdio>
#include <string>
#include <vector>

#include "mtcad/covariance_detector.hpp"
#include "mtcad/errors.hpp"
#include "mtcad/evaluation.hpp"
#include "mtcad/het_transformer.hpp"
#include "mtcad/io.hpp"
#include "mtcad/rng.hpp"
#include "mtcad/signal_model.hpp"
#include "mtcad/training.hpp"

namespace {

using namespace mtcad;

// Registers the flags shared by all subcommands. Defaults come from `cfg`,
// which the caller pre-loads from --config, so precedence is
// defaults < config file < explicit flags.
void add_config_flags(CLI::App* cmd, ExperimentConfig& cfg) {
  static std::string config_path;  // consumed by the pre-pass, listed for --help
  cmd->add_option("--config", config_path, "configuration file (applied before other flags)")
      ->check(CLI::ExistingFile);
  cmd->add_option("--n", cfg.scenario.n_devices, "device count");
  cmd->add_option("--lp", cfg.scenario.pilot_len, "pilot length");
  cmd->add_option("--m", cfg.m_antennas, "BS antenna count");
  cmd->add_option("--radius-km", cfg.scenario.cell_radius_km, "cell radius");
  cmd->add_option("--p-max-dbm", cfg.scenario.p_max_dbm, "max transmit power");
  cmd->add_option("--noise-psd-dbm-hz", cfg.scenario.noise_psd_dbm_hz, "noise PSD");
  cmd->add_option("--bandwidth-hz", cfg.scenario.bandwidth_hz, "bandwidth");
  cmd->add_option("--activity-ratio", cfg.activity_ratio, "active-device ratio");
  cmd->add_option("--data-seed", cfg.data_seed, "dataset master seed");
  cmd->add_option("--count", cfg.sample_count, "sample count");
  cmd->add_option("--layers", cfg.model.layers, "encoder layers");
  cmd->add_option("--d-model", cfg.model.d_model, "embedding size");
  cmd->add_option("--d-attn", cfg.model.d_attn, "attention-space size");
  cmd->add_option("--heads", cfg.model.heads, "attention heads");
  cmd->add_option("--d-ff", cfg.model.d_ff, "feed-forward hidden size");
  cmd->add_option("--c-clip", cfg.model.c_clip, "output compatibility scale");
  cmd->add_option("--epochs", cfg.train.epochs, "training epochs");
  cmd->add_option("--steps", cfg.train.steps_per_epoch, "steps per epoch");
  cmd->add_option("--batch", cfg.train.batch_size, "batch size");
  cmd->add_option("--lr", cfg.train.lr, "learning rate");
  cmd->add_option("--decay-epochs", cfg.train.decay_epochs,
                  "epochs after which the rate decays")
      ->delimiter(',');
  cmd->add_option("--decay-factor", cfg.train.decay_factor, "decay factor");
  cmd->add_option("--train-seed", cfg.train.seed, "training master seed");
  cmd->add_option("--passes", cfg.cd_passes, "coordinate-descent passes");
}

// --config must take effect before the other flags, so it is resolved in a
// manual pre-pass.
ExperimentConfig preload_config(int argc, char** argv) {
  for (int i = 1; i + 1 < argc; ++i)
    if (std::string(argv[i]) == "--config") return load_config(argv[i + 1]);
  return {};
}

int cmd_gen_data(const ExperimentConfig& cfg, const std::string& out_path,
                 bool keep_y, bool fixed_scenario) {
  Dataset dataset;
  dataset.n_devices = cfg.scenario.n_devices;
  dataset.pilot_len = cfg.scenario.pilot_len;
  dataset.m_antennas = cfg.m_antennas;
  dataset.has_received = keep_y;
  dataset.samples.reserve(cfg.sample_count);

  Scenario fixed;
  if (fixed_scenario) fixed = generate_scenario(cfg.scenario, split_seed(cfg.data_seed, 0));
  int64_t active = 0;
  for (int i = 0; i < cfg.sample_count; ++i) {
    const uint64_t seed = split_seed(cfg.data_seed, 1 + i);
    const Scenario scenario =
        fixed_scenario ? fixed : generate_scenario(cfg.scenario, split_seed(seed, 0));
    Sample s = draw_sample(scenario, cfg.m_antennas, cfg.activity_ratio,
                           split_seed(seed, 1), keep_y);
    for (uint8_t l : s.labels) active += l;
    dataset.samples.push_back(std::move(s));
  }
  save_dataset(out_path, dataset);
  const double realized =
      cfg.sample_count > 0
          ? static_cast<double>(active) / (double(cfg.sample_count) * cfg.scenario.n_devices)
          : 0.0;
  std::printf("wrote %s: %d samples, N=%d Lp=%d M=%d, realized activity %.4f\n",
              out_path.c_str(), cfg.sample_count, cfg.scenario.n_devices,
              cfg.scenario.pilot_len, cfg.m_antennas, realized);
  return 0;
}

int cmd_train(ExperimentConfig cfg, const std::string& out_path,
              const std::string& trace_path) {
  // decay epochs beyond the schedule can never fire; drop them so short
  // runs compose with the long-run defaults
  std::erase_if(cfg.train.decay_epochs,
                [&](int e) { return e > cfg.train.epochs; });
  HTParams params = HTParams::init(cfg.model, cfg.scenario.pilot_len,
                                   split_seed(cfg.train.seed, 0x1a171));
  SamplingConfig sampling;
  sampling.scenario = cfg.scenario;
  sampling.m_antennas = cfg.m_antennas;
  sampling.activity_ratio = cfg.activity_ratio;
  sampling.fresh_scenario_per_batch = cfg.fresh_scenario_per_batch;

  TrainResult result = train(params, cfg.train, sampling, [](const EpochStat& e) {
    std::printf("epoch %d\tloss %.6f\tlr %.3g\n", e.epoch, e.mean_loss, e.lr);
    std::fflush(stdout);
  });
  save_checkpoint(out_path, params);
  if (!trace_path.empty()) save_loss_trace(trace_path, result.trace);
  std::printf("wrote %s (%lld parameters)\n", out_path.c_str(),
              static_cast<long long>(params.param_count()));
  return 0;
}

struct EvalScores {
  std::vector<double> scores;
  std::vector<uint8_t> labels;
};

EvalScores covariance_scores(const Dataset& dataset, double noise_var, int passes) {
  EvalScores out;
  CdOptions options;
  options.passes = passes;
  for (const Sample& s : dataset.samples) {
    CdResult r = detect_cd(s.cov, s.scaled_pilots, noise_var, options);
    out.scores.insert(out.scores.end(), r.activity.begin(), r.activity.end());
    out.labels.insert(out.labels.end(), s.labels.begin(), s.labels.end());
  }
  return out;
}

EvalScores ht_scores(const Dataset& dataset, HTParams& params) {
  EvalScores out;
  auto probs = ht_infer_dataset(dataset.samples, params);
  for (size_t i = 0; i < dataset.samples.size(); ++i) {
    out.scores.insert(out.scores.end(), probs[i].begin(), probs[i].end());
    out.labels.insert(out.labels.end(), dataset.samples[i].labels.begin(),
                      dataset.samples[i].labels.end());
  }
  return out;
}

void print_operating_points(const RocCurve& curve) {
  for (double ratio : {1.0, 2.0}) {
    OperatingPoint op = operating_point(curve, ratio);
    std::printf("%s\tPF=%.0fPM\txi=%.6f\tPM=%.6g\tPF=%.6g%s\n",
                curve.detector.c_str(), ratio, op.xi, op.pm, op.pf,
                op.crossed ? "" : "\t(no crossing, nearest point)");
  }
}

int cmd_eval(const ExperimentConfig& cfg, const std::string& data_path,
             const std::string& checkpoint_path, bool covariance,
             const std::string& curve_path) {
  Dataset dataset = load_dataset(data_path);
  RocCurve curve;
  if (covariance) {
    const double noise_var =
        noise_power_watts(cfg.scenario.noise_psd_dbm_hz, cfg.scenario.bandwidth_hz);
    EvalScores ev = covariance_scores(dataset, noise_var, cfg.cd_passes);
    curve = roc_sweep(ev.scores, ev.labels);
    curve.detector = "covariance";
  } else {
    HTParams params = load_checkpoint(checkpoint_path);
    if (params.pilot_len != dataset.pilot_len)
      throw incompat_error("checkpoint pilot length " +
                           std::to_string(params.pilot_len) + " vs dataset " +
                           std::to_string(dataset.pilot_len));
    EvalScores ev = ht_scores(dataset, params);
    curve = roc_sweep(ev.scores, ev.labels);
    curve.detector = "ht";
  }
  curve.n_devices = dataset.n_devices;
  curve.pilot_len = dataset.pilot_len;
  curve.m_antennas = dataset.m_antennas;
  if (!curve_path.empty()) save_curve(curve_path, curve);
  print_operating_points(curve);
  return 0;
}

int cmd_bench(const ExperimentConfig& cfg, const std::string& data_path,
              const std::string& checkpoint_path, int reps, int warmup) {
  Dataset dataset = load_dataset(data_path);
  const auto count = static_cast<int64_t>(dataset.samples.size());
  if (count == 0) throw io_error("bench: dataset is empty");
  // keep the per-sample mean averaged over at least 100 inferences
  while (count * reps < 100) ++reps;

  const double noise_var =
      noise_power_watts(cfg.scenario.noise_psd_dbm_hz, cfg.scenario.bandwidth_hz);
  CdOptions options;
  options.passes = cfg.cd_passes;
  BenchResult cd = bench_time(
      [&] {
        for (const Sample& s : dataset.samples)
          detect_cd(s.cov, s.scaled_pilots, noise_var, options);
      },
      count, reps, warmup);

  std::printf("detector\tmean_s\tmedian_s\tsamples\treps\n");
  std::printf("covariance\t%.6e\t%.6e\t%lld\t%d\n", cd.mean_per_sample_s,
              cd.median_per_sample_s, static_cast<long long>(cd.samples), cd.reps);

  if (!checkpoint_path.empty()) {
    HTParams params = load_checkpoint(checkpoint_path);
    if (params.pilot_len != dataset.pilot_len)
      throw incompat_error("checkpoint pilot length " +
                           std::to_string(params.pilot_len) + " vs dataset " +
                           std::to_string(dataset.pilot_len));
    BenchResult ht = bench_time([&] { ht_infer_dataset(dataset.samples, params); },
                                count, reps, warmup);
    std::printf("ht\t%.6e\t%.6e\t%lld\t%d\n", ht.mean_per_sample_s,
                ht.median_per_sample_s, static_cast<long long>(ht.samples), ht.reps);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MTC device-activity detection toolkit"};
  app.require_subcommand(1);

  ExperimentConfig cfg;
  try {
    cfg = preload_config(argc, argv);
  } catch (const mtcad::io_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }

  std::string out_path, trace_path, data_path, checkpoint_path, curve_path;
  bool keep_y = false, fixed_scenario = false, covariance = false;
  int reps = 3, warmup = 2;

  CLI::App* gen = app.add_subcommand("gen-data", "generate a labeled dataset");
  add_config_flags(gen, cfg);
  gen->add_option("--out", out_path, "output dataset path")->required();
  gen->add_flag("--keep-y", keep_y, "store the raw received signal too");
  gen->add_flag("--fixed-scenario", fixed_scenario,
                "one pilot/placement draw for the whole dataset");

  CLI::App* train = app.add_subcommand("train", "train the attention detector");
  add_config_flags(train, cfg);
  train->add_option("--out", out_path, "output checkpoint path")->required();
  train->add_option("--trace", trace_path, "loss-trace output path");

  CLI::App* eval = app.add_subcommand("eval", "threshold sweep on a dataset");
  add_config_flags(eval, cfg);
  eval->add_option("--data", data_path, "dataset path")->required();
  eval->add_option("--checkpoint", checkpoint_path, "trained model");
  eval->add_flag("--covariance", covariance, "evaluate the covariance baseline");
  eval->add_option("--curve-out", curve_path, "ROC curve output path");

  CLI::App* bench = app.add_subcommand("bench", "per-sample timing comparison");
  add_config_flags(bench, cfg);
  bench->add_option("--data", data_path, "dataset path")->required();
  bench->add_option("--checkpoint", checkpoint_path, "trained model");
  bench->add_option("--reps", reps, "timed repetitions over the dataset");
  bench->add_option("--warmup", warmup, "untimed repetitions first");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(cfg, out_path, keep_y, fixed_scenario);
    if (train->parsed()) return cmd_train(cfg, out_path, trace_path);
    if (eval->parsed()) {
      if (covariance != checkpoint_path.empty()) {
        std::fprintf(stderr, "eval: pass exactly one of --checkpoint or --covariance\n");
        return 1;
      }
      return cmd_eval(cfg, data_path, checkpoint_path, covariance, curve_path);
    }
    if (bench->parsed()) return cmd_bench(cfg, data_path, checkpoint_path, reps, warmup);
  } catch (const mtcad::incompat_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 4;
  } catch (const mtcad::numeric_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const mtcad::io_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
