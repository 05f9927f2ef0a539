#include <pybind11/complex.h>
#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "mtcad/covariance_detector.hpp"
#include "mtcad/evaluation.hpp"
#include "mtcad/het_transformer.hpp"
#include "mtcad/io.hpp"
#include "mtcad/rng.hpp"
#include "mtcad/signal_model.hpp"
#include "mtcad/training.hpp"

namespace py = pybind11;
using namespace mtcad;

namespace {

using ComplexArray = py::array_t<std::complex<double>,
                                 py::array::f_style | py::array::forcecast>;

ComplexMatrix to_matrix(const ComplexArray& arr) {
  if (arr.ndim() != 2) throw std::invalid_argument("expected a 2-D complex array");
  ComplexMatrix m(static_cast<int>(arr.shape(0)), static_cast<int>(arr.shape(1)));
  auto view = arr.unchecked<2>();
  for (int j = 0; j < m.cols(); ++j)
    for (int i = 0; i < m.rows(); ++i) m.set(i, j, view(i, j));
  return m;
}

py::array_t<std::complex<double>> to_array(const ComplexMatrix& m) {
  py::array_t<std::complex<double>> arr({m.rows(), m.cols()});
  auto view = arr.mutable_unchecked<2>();
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) view(i, j) = m.at(i, j);
  return arr;
}

// Owns the parameters plus the pilot length they were built for.
struct PyModel {
  HTParams params;
};

std::vector<double> flatten_rows(const py::array_t<double, py::array::c_style |
                                                               py::array::forcecast>& a) {
  std::vector<double> out(a.size());
  std::copy(a.data(), a.data() + a.size(), out.begin());
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Device-activity detection: simulator, covariance coordinate "
            "descent, and the attention-based detector";

  py::class_<ScenarioConfig>(m, "ScenarioConfig")
      .def(py::init([](int n, int lp, double radius_km, double p_max_dbm,
                       double noise_psd_dbm_hz, double bandwidth_hz) {
             return ScenarioConfig{n, lp, radius_km, p_max_dbm, noise_psd_dbm_hz,
                                   bandwidth_hz};
           }),
           py::arg("n_devices") = 100, py::arg("pilot_len") = 8,
           py::arg("cell_radius_km") = 0.25, py::arg("p_max_dbm") = 23.0,
           py::arg("noise_psd_dbm_hz") = -169.0, py::arg("bandwidth_hz") = 1e7)
      .def_readwrite("n_devices", &ScenarioConfig::n_devices)
      .def_readwrite("pilot_len", &ScenarioConfig::pilot_len)
      .def_readwrite("cell_radius_km", &ScenarioConfig::cell_radius_km)
      .def_readwrite("p_max_dbm", &ScenarioConfig::p_max_dbm)
      .def_readwrite("noise_psd_dbm_hz", &ScenarioConfig::noise_psd_dbm_hz)
      .def_readwrite("bandwidth_hz", &ScenarioConfig::bandwidth_hz);

  py::class_<Scenario>(m, "Scenario")
      .def_readonly("n_devices", &Scenario::n_devices)
      .def_readonly("pilot_len", &Scenario::pilot_len)
      .def_readonly("noise_var", &Scenario::noise_var)
      .def_readonly("gain", &Scenario::gain)
      .def_readonly("power", &Scenario::power)
      .def_property_readonly("pilots",
                             [](const Scenario& s) { return to_array(s.pilots); })
      .def_property_readonly("scaled_pilots", [](const Scenario& s) {
        return to_array(s.scaled_pilots);
      });

  py::class_<Sample>(m, "Sample")
      .def_readonly("m_antennas", &Sample::m_antennas)
      .def_property_readonly("labels",
                             [](const Sample& s) {
                               py::array_t<uint8_t> arr(s.labels.size());
                               std::copy(s.labels.begin(), s.labels.end(),
                                         arr.mutable_data());
                               return arr;
                             })
      .def_property_readonly("scaled_pilots",
                             [](const Sample& s) { return to_array(s.scaled_pilots); })
      .def_property_readonly("cov", [](const Sample& s) { return to_array(s.cov); })
      .def_property_readonly("received", [](const Sample& s) {
        return s.received.empty() ? py::object(py::none())
                                  : py::object(to_array(s.received));
      });

  m.def("path_loss_db", &path_loss_db, py::arg("distance_km"));
  m.def("noise_power_watts", &noise_power_watts, py::arg("psd_dbm_hz"),
        py::arg("bandwidth_hz"));
  m.def("generate_scenario", &generate_scenario, py::arg("config"), py::arg("seed"));
  m.def(
      "draw_sample",
      [](const Scenario& sc, int m_antennas, double activity_ratio, uint64_t seed,
         bool keep_received) {
        return draw_sample(sc, m_antennas, activity_ratio, seed, keep_received);
      },
      py::arg("scenario"), py::arg("m_antennas"), py::arg("activity_ratio"),
      py::arg("seed"), py::arg("keep_received") = false);
  m.def(
      "sample_covariance",
      [](const ComplexArray& y) { return to_array(sample_covariance(to_matrix(y))); },
      py::arg("received"));

  m.def(
      "nll",
      [](const std::vector<double>& activity, const ComplexArray& cov,
         const ComplexArray& pilots, double noise_var) {
        return cd_nll(activity, to_matrix(cov), to_matrix(pilots), noise_var);
      },
      py::arg("activity"), py::arg("cov"), py::arg("scaled_pilots"),
      py::arg("noise_var"));

  py::class_<CdResult>(m, "CdResult")
      .def_readonly("activity", &CdResult::activity)
      .def_readonly("pass_nll", &CdResult::pass_nll)
      .def_readonly("step_nll", &CdResult::step_nll)
      .def_readonly("passes_run", &CdResult::passes_run);

  m.def(
      "detect_cd",
      [](const ComplexArray& cov, const ComplexArray& pilots, double noise_var,
         int passes, const std::string& order, uint64_t seed, bool per_step_trace) {
        CdOptions options;
        options.passes = passes;
        options.seed = seed;
        options.per_step_trace = per_step_trace;
        if (order == "random") options.order = CdOptions::Order::Random;
        else if (order != "cyclic")
          throw std::invalid_argument("order must be 'cyclic' or 'random'");
        return detect_cd(to_matrix(cov), to_matrix(pilots), noise_var, options);
      },
      py::arg("cov"), py::arg("scaled_pilots"), py::arg("noise_var"),
      py::arg("passes") = 10, py::arg("order") = "cyclic", py::arg("seed") = 0,
      py::arg("per_step_trace") = false);
  m.def("threshold", &threshold, py::arg("activity"), py::arg("xi"));

  py::class_<HTConfig>(m, "HTConfig")
      .def(py::init([](int layers, int d_model, int d_attn, int heads, int d_ff,
                       double c_clip) {
             return HTConfig{layers, d_model, d_attn, heads, d_ff, c_clip};
           }),
           py::arg("layers") = 5, py::arg("d_model") = 128, py::arg("d_attn") = 32,
           py::arg("heads") = 8, py::arg("d_ff") = 512, py::arg("c_clip") = 10.0)
      .def_readwrite("layers", &HTConfig::layers)
      .def_readwrite("d_model", &HTConfig::d_model)
      .def_readwrite("d_attn", &HTConfig::d_attn)
      .def_readwrite("heads", &HTConfig::heads)
      .def_readwrite("d_ff", &HTConfig::d_ff)
      .def_readwrite("c_clip", &HTConfig::c_clip);

  py::class_<PyModel>(m, "HetTransformer")
      .def(py::init([](const HTConfig& config, int pilot_len, uint64_t seed) {
             return PyModel{HTParams::init(config, pilot_len, seed)};
           }),
           py::arg("config"), py::arg("pilot_len"), py::arg("seed") = 0)
      .def_static("load",
                  [](const std::string& path) { return PyModel{load_checkpoint(path)}; })
      .def("save",
           [](const PyModel& self, const std::string& path) {
             save_checkpoint(path, self.params);
           })
      .def_property_readonly("pilot_len",
                             [](const PyModel& self) { return self.params.pilot_len; })
      .def_property_readonly(
          "param_count", [](const PyModel& self) { return self.params.param_count(); })
      .def("forward",
           [](PyModel& self, const ComplexArray& pilots, const ComplexArray& cov) {
             std::vector<double> p =
                 ht_infer(to_matrix(pilots), to_matrix(cov), self.params);
             py::array_t<double> arr(p.size());
             std::copy(p.begin(), p.end(), arr.mutable_data());
             return arr;
           },
           py::arg("scaled_pilots"), py::arg("cov"));

  m.def(
      "train_ht",
      [](PyModel& model, const ScenarioConfig& scenario, int m_antennas,
         double activity_ratio, int epochs, int steps, int batch, double lr,
         const std::vector<int>& decay_epochs, double decay_factor, uint64_t seed,
         bool fresh_scenario) {
        TrainConfig config;
        config.epochs = epochs;
        config.steps_per_epoch = steps;
        config.batch_size = batch;
        config.lr = lr;
        config.decay_epochs = decay_epochs;
        config.decay_factor = decay_factor;
        config.seed = seed;
        SamplingConfig sampling{scenario, m_antennas, activity_ratio, fresh_scenario};
        TrainResult res = train(model.params, config, sampling);
        std::vector<std::tuple<int, double, double>> trace;
        for (const auto& e : res.trace) trace.emplace_back(e.epoch, e.mean_loss, e.lr);
        return trace;
      },
      py::arg("model"), py::arg("scenario"), py::arg("m_antennas"),
      py::arg("activity_ratio"), py::arg("epochs"), py::arg("steps"),
      py::arg("batch"), py::arg("lr") = 1e-4,
      py::arg("decay_epochs") = std::vector<int>{}, py::arg("decay_factor") = 0.1,
      py::arg("seed") = 1, py::arg("fresh_scenario") = true);

  m.def(
      "weighted_bce_loss",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& probs,
         const py::array_t<uint8_t, py::array::c_style | py::array::forcecast>& labels,
         double activity_ratio) {
        if (probs.ndim() != 2 || labels.ndim() != 2)
          throw std::invalid_argument("probs and labels must be 2-D (batch, devices)");
        Tape tape;
        Tensor p = Tensor::from_data({static_cast<int>(probs.shape(0)),
                                      static_cast<int>(probs.shape(1))},
                                     flatten_rows(probs));
        std::vector<uint8_t> lab(labels.data(), labels.data() + labels.size());
        return weighted_bce_loss(tape, p, lab, activity_ratio).item();
      },
      py::arg("probs"), py::arg("labels"), py::arg("activity_ratio"));

  m.def(
      "pm_pf",
      [](const std::vector<uint8_t>& decisions, const std::vector<uint8_t>& labels) {
        PmPf r = pm_pf(decisions, labels);
        return std::make_pair(r.pm, r.pf);
      },
      py::arg("decisions"), py::arg("labels"));

  py::class_<OperatingPoint>(m, "OperatingPoint")
      .def_readonly("xi", &OperatingPoint::xi)
      .def_readonly("pm", &OperatingPoint::pm)
      .def_readonly("pf", &OperatingPoint::pf)
      .def_readonly("crossed", &OperatingPoint::crossed);

  m.def(
      "roc_sweep",
      [](const std::vector<double>& scores, const std::vector<uint8_t>& labels,
         std::vector<double> thresholds) {
        RocCurve curve = roc_sweep(scores, labels, std::move(thresholds));
        std::vector<std::tuple<double, double, double>> out;
        for (const auto& p : curve.points) out.emplace_back(p.xi, p.pm, p.pf);
        return out;
      },
      py::arg("scores"), py::arg("labels"),
      py::arg("thresholds") = std::vector<double>{});

  m.def(
      "operating_point",
      [](const std::vector<std::tuple<double, double, double>>& points, double ratio) {
        RocCurve curve;
        for (const auto& [xi, pm, pf] : points) curve.points.push_back({xi, pm, pf});
        return operating_point(curve, ratio);
      },
      py::arg("curve_points"), py::arg("ratio") = 1.0);

  m.def(
      "bench_seconds_per_sample",
      [](const std::function<void()>& run_all, int64_t sample_count, int reps,
         int warmup) {
        BenchResult r = bench_time(run_all, sample_count, reps, warmup);
        return std::make_pair(r.mean_per_sample_s, r.median_per_sample_s);
      },
      py::arg("run_all"), py::arg("sample_count"), py::arg("reps") = 3,
      py::arg("warmup") = 2);
}
