#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "stopdeck/bench.hpp"
#include "stopdeck/cli.hpp"
#include "stopdeck/deepstop.hpp"
#include "stopdeck/error.hpp"
#include "stopdeck/lsmc.hpp"
#include "stopdeck/market.hpp"
#include "stopdeck/simulate.hpp"

namespace py = pybind11;
using namespace stopdeck;

namespace {

// Paths are returned to Python as a plain (batch, steps + 1) array; the
// batch metadata is rebuilt on the way back in.
PathBatch as_batch(const RowMatrix& prices, double dt) {
  PathBatch b;
  b.prices = prices;
  b.dt = dt;
  return b;
}

py::dict stats_dict(const EvalStats& s) {
  py::dict d;
  d["mean"] = s.mean;
  d["std"] = s.std;
  d["n"] = s.n;
  d["ci_lo"] = s.ci_lo;
  d["ci_hi"] = s.ci_hi;
  d["se"] = s.standard_error();
  return d;
}

}  // namespace

PYBIND11_MODULE(_stopdeck, m) {
  m.doc() = "Optimal stopping with a convolutional policy and a Longstaff-Schwartz baseline";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<RuntimeError>(m, "StopdeckRuntimeError", PyExc_RuntimeError);

  py::enum_<OptionKind>(m, "OptionKind").value("put", OptionKind::put).value("call", OptionKind::call);

  py::class_<MarketParams>(m, "MarketParams")
      .def(py::init([](double s0, double strike, double maturity, double rate, double dividend, double sigma,
                       int steps, OptionKind kind) {
             MarketParams p{s0, strike, maturity, rate, dividend, sigma, steps, kind};
             p.validate();
             return p;
           }),
           py::arg("s0") = 100.0, py::arg("strike") = 100.0, py::arg("maturity") = 1.0, py::arg("rate") = 0.0,
           py::arg("dividend") = 0.0, py::arg("sigma") = 0.0, py::arg("steps") = 2,
           py::arg("option_kind") = OptionKind::put)
      .def_readwrite("s0", &MarketParams::s0)
      .def_readwrite("strike", &MarketParams::strike)
      .def_readwrite("maturity", &MarketParams::maturity)
      .def_readwrite("rate", &MarketParams::rate)
      .def_readwrite("dividend", &MarketParams::dividend)
      .def_readwrite("sigma", &MarketParams::sigma)
      .def_readwrite("steps", &MarketParams::steps)
      .def_readwrite("option_kind", &MarketParams::option_kind)
      .def_property_readonly("dt", &MarketParams::dt);

  m.def("gbm_paths", [](const MarketParams& p, std::size_t batch, std::uint64_t seed) { return gen_gbm(p, batch, seed).prices; },
        py::arg("params"), py::arg("batch"), py::arg("seed"));
  m.def("fbm_paths",
        [](const MarketParams& p, double hurst, std::size_t batch, std::uint64_t seed) {
          return gen_fbm(p, hurst, batch, seed).prices;
        },
        py::arg("params"), py::arg("hurst"), py::arg("batch"), py::arg("seed"));
  m.def("harmonic_paths",
        [](const MarketParams& p, double ampl, double freq1, double freq2, double noise_std, bool random_phase,
           std::size_t batch, std::uint64_t seed) {
          GeneratorSpec spec;
          spec.kind = GeneratorKind::harmonic;
          spec.ampl = ampl;
          spec.freq1 = freq1;
          spec.freq2 = freq2;
          spec.noise_std = noise_std;
          spec.random_phase = random_phase;
          spec.validate();
          return gen_harmonic(p, spec, batch, seed).prices;
        },
        py::arg("params"), py::arg("ampl") = 0.2, py::arg("freq1") = 0.3, py::arg("freq2") = 2.0,
        py::arg("noise_std") = 0.01, py::arg("random_phase") = true, py::arg("batch"), py::arg("seed"));
  m.def("fbm_covariance", &fbm_covariance, py::arg("ti"), py::arg("tj"), py::arg("h"));

  m.def("payoff_matrix",
        [](const RowMatrix& prices, const MarketParams& p, bool discounted) {
          return payoff_matrix(as_batch(prices, p.dt()), p, discounted);
        },
        py::arg("prices"), py::arg("params"), py::arg("discounted") = true);

  py::class_<LsmcModel>(m, "LsmcModel")
      .def_readonly("degree", &LsmcModel::degree)
      .def_readonly("steps", &LsmcModel::steps)
      .def("continuation", &LsmcModel::continuation, py::arg("t"), py::arg("s"))
      .def("to_text", [](const LsmcModel& model) { return serialize_lsmc(model); })
      .def_static("from_text", &deserialize_lsmc);

  m.def("lsmc_fit",
        [](const RowMatrix& prices, const MarketParams& p, int degree) {
          auto fit = lsmc_fit_detailed(as_batch(prices, p.dt()), p, degree);
          return py::make_tuple(fit.model, stats_dict(fit.in_sample));
        },
        py::arg("prices"), py::arg("params"), py::arg("degree") = 3,
        "Fits the regression rule; returns (model, in-sample stats).");
  m.def("lsmc_apply",
        [](const LsmcModel& model, const RowMatrix& prices, const MarketParams& p) {
          auto res = lsmc_apply_detailed(model, as_batch(prices, p.dt()), p);
          return py::make_tuple(res.stop_step, stats_dict(res.stats));
        },
        py::arg("model"), py::arg("prices"), py::arg("params"));

  py::class_<TrainedPolicy>(m, "Policy")
      .def_property_readonly("trace",
                             [](const TrainedPolicy& pol) {
                               py::list out;
                               for (const auto& r : pol.trace) out.append(py::make_tuple(r.epoch, r.mean_payoff, r.loss));
                               return out;
                             })
      .def_property_readonly("parameter_count", [](const TrainedPolicy& pol) { return pol.network.parameter_count(); })
      .def("save", [](const TrainedPolicy& pol, const std::string& path) { save_policy(path, pol); })
      .def_static("load", &load_policy);

  m.def("train_gbm",
        [](const MarketParams& p, int epochs, std::size_t batch, double learning_rate, std::uint64_t seed) {
          TrainingConfig hyper;
          hyper.epochs = epochs;
          hyper.batch = batch;
          hyper.optimizer.learning_rate = learning_rate;
          hyper.validate();
          py::gil_scoped_release release;
          return train(GeneratorSpec{}, p, hyper, seed);
        },
        py::arg("params"), py::arg("epochs") = 300, py::arg("batch") = 8192, py::arg("learning_rate") = 1e-3,
        py::arg("seed") = 0);
  m.def("evaluate",
        [](const TrainedPolicy& pol, const RowMatrix& prices, const MarketParams& p) {
          auto res = evaluate_detailed(pol, as_batch(prices, p.dt()), p);
          return py::make_tuple(res.stop_step, stats_dict(res.stats));
        },
        py::arg("policy"), py::arg("prices"), py::arg("params"));

  m.def("improvement_pct", &improvement_pct, py::arg("cnn_mean"), py::arg("lsmc_mean"));

  m.def("run_cli",
        [](const std::vector<std::string>& args) {
          std::ostringstream out, err;
          const int code = run_cli(args, out, err);
          return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"), "Runs the command-line front end in-process; returns (exit code, stdout, stderr).");
}
