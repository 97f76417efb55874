#include "heavytail/cli.hpp"
#include "heavytail/errors.hpp"
#include "heavytail/matcomp.hpp"
#include "heavytail/results_io.hpp"
#include "heavytail/simlab.hpp"
#include "heavytail/transforms.hpp"
#include "heavytail/vicm.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

namespace py = pybind11;
using namespace heavytail;

namespace {

std::vector<VicmSample> to_samples(const Vector& y, const DenseMatrix& x, const DenseMatrix& z) {
  if (x.rows() != y.size() || z.rows() != y.size()) {
    throw ShapeError("y, x and z must have the same number of rows");
  }
  std::vector<VicmSample> samples(static_cast<std::size_t>(y.size()));
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    auto& s = samples[static_cast<std::size_t>(i)];
    s.y = y(i);
    s.x = x.row(i).transpose();
    s.z = z.row(i).transpose();
  }
  return samples;
}

py::list records_to_list(const std::vector<ExperimentRecord>& records) {
  py::list out;
  for (const ExperimentRecord& r : records) {
    py::dict d;
    d["experiment"] = r.experiment;
    d["estimator"] = r.estimator;
    d["noise"] = r.noise;
    d["n"] = r.n;
    d["replicate"] = r.replicate;
    d["error"] = r.error;
    d["converged"] = r.converged;
    out.append(d);
  }
  return out;
}

py::dict output_to_dict(const ExperimentOutput& output) {
  py::dict d;
  d["records"] = records_to_list(output.records);
  d["summary"] = py::module_::import("json").attr("loads")(summary_json(output).dump());
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Robust estimation under heavy-tailed noise";

  static py::exception<Error> base(m, "HeavytailError", PyExc_RuntimeError);
  py::register_exception<ParameterError>(m, "ParameterError", PyExc_ValueError);
  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", base.ptr());
  py::register_exception<DegenerateDataError>(m, "DegenerateDataError", base.ptr());

  m.def("psi", &psi, py::arg("x"), py::arg("tau"), "Clip x to [-tau, tau].");
  m.def(
      "psi_matrix",
      [](const DenseMatrix& a, const DenseMatrix& tau) { return psi_matrix(a, TruncationMatrix(tau)); },
      py::arg("a"), py::arg("tau"));
  m.def(
      "calibrate_tau",
      [](const std::vector<double>& values, double target) {
        const TauCalibration c = calibrate_tau(values, target);
        return py::make_tuple(c.tau, c.residual, c.saturated);
      },
      py::arg("values"), py::arg("target"),
      "Solve sum psi_tau(x)^2 / tau^2 = target; returns (tau, residual, saturated).");
  m.def(
      "calibrate_levels",
      [](const Vector& y, const DenseMatrix& x, const DenseMatrix& z, const std::string& score,
         std::optional<double> target1, std::optional<double> target2, double target_factor) {
        CalibrationTargets t;
        if (z.cols() >= 2) {
          t = CalibrationTargets::defaults(x.cols(), z.cols(), target_factor);
        }
        if (target1) t.cross = *target1;
        if (target2) t.covariance = *target2;
        const VicmLevels l =
            calibrate_vicm_levels(to_samples(y, x, z), ScoreFunction::parse(score), t);
        return py::make_tuple(l.gamma1.levels(), l.gamma2.levels(), l.residual1, l.residual2);
      },
      py::arg("y"), py::arg("x"), py::arg("z"), py::arg("score") = "gaussian",
      py::arg("target1") = py::none(), py::arg("target2") = py::none(),
      py::arg("target_factor") = kDefaultTargetFactor,
      "Returns (gamma1, gamma2, residual1, residual2).");

  m.def("svt", &svt, py::arg("m"), py::arg("threshold"));
  m.def("nuclear_norm", &nuclear_norm, py::arg("m"));

  py::class_<McConfig>(m, "McConfig")
      .def(py::init([](std::size_t d1, std::size_t d2, double r, double alpha, double c1,
                       double c2, std::size_t max_iter, double tol) {
             McConfig c;
             c.d1 = d1;
             c.d2 = d2;
             c.max_norm_budget = r;
             c.alpha = alpha;
             c.tau_scale = c1;
             c.lambda_scale = c2;
             c.admm.max_iter = max_iter;
             c.admm.primal_tol = tol;
             c.admm.dual_tol = tol;
             c.validate();
             return c;
           }),
           py::arg("d1"), py::arg("d2"), py::arg("max_norm_budget") = 10.0, py::arg("alpha") = 2.0,
           py::arg("tau_scale") = 1.0, py::arg("lambda_scale") = 1.0,
           py::arg("max_iter") = 20000, py::arg("tol") = 1e-9)
      .def_readwrite("d1", &McConfig::d1)
      .def_readwrite("d2", &McConfig::d2)
      .def_readwrite("max_norm_budget", &McConfig::max_norm_budget)
      .def_readwrite("alpha", &McConfig::alpha)
      .def_readwrite("tau_scale", &McConfig::tau_scale)
      .def_readwrite("lambda_scale", &McConfig::lambda_scale);

  m.def(
      "schedule",
      [](const McConfig& cfg, std::size_t n) {
        const McSchedule s = schedule_simulation(cfg, n);
        return py::make_tuple(s.tau, s.lambda);
      },
      py::arg("config"), py::arg("n"), "Simulation schedule; returns (tau, lambda).");
  m.def(
      "solve_mc",
      [](const std::vector<std::size_t>& rows, const std::vector<std::size_t>& cols,
         const std::vector<double>& responses, const McConfig& cfg, double tau, double lambda) {
        if (rows.size() != cols.size() || rows.size() != responses.size()) {
          throw ShapeError("rows, cols and responses must have equal length");
        }
        std::vector<McSample> samples(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) {
          samples[i] = {rows[i], cols[i], responses[i]};
        }
        const McSolution sol = solve_mc(accumulate_stats(samples, cfg.d1, cfg.d2, tau), cfg, lambda);
        return py::make_tuple(sol.estimate, sol.converged, sol.iterations);
      },
      py::arg("rows"), py::arg("cols"), py::arg("responses"), py::arg("config"), py::arg("tau"),
      py::arg("lambda_"), "Returns (estimate, converged, iterations).");

  m.def("clime", [](const DenseMatrix& s, double gamma) { return clime(s, gamma).omega; },
        py::arg("sigma"), py::arg("gamma"));
  m.def("soft_threshold", &soft_threshold, py::arg("a"), py::arg("threshold"));
  m.def(
      "estimate_vicm",
      [](const Vector& y, const DenseMatrix& x, const DenseMatrix& z, const std::string& score,
         double clime_gamma, double lambda, bool robust) {
        VicmConfig cfg;
        cfg.d1 = x.cols();
        cfg.d2 = z.cols();
        cfg.score = ScoreFunction::parse(score);
        cfg.clime_gamma = clime_gamma;
        cfg.lambda = lambda;
        cfg.robust = robust;
        return estimate_vicm(to_samples(y, x, z), cfg).theta_hat;
      },
      py::arg("y"), py::arg("x"), py::arg("z"), py::arg("score") = "gaussian",
      py::arg("clime_gamma") = 0.1, py::arg("lambda_") = 0.0, py::arg("robust") = true);
  m.def(
      "direction_distance",
      [](const DenseMatrix& a, const DenseMatrix& b) { return direction_distance(a, b).value; },
      py::arg("theta_hat"), py::arg("theta_star"));

  m.def(
      "fit_loglog_slope",
      [](const std::vector<double>& n, const std::vector<double>& e) {
        const SlopeFit f = fit_loglog_slope(n, e);
        return py::make_tuple(f.intercept, f.slope, f.r_squared);
      },
      py::arg("n"), py::arg("error"), "Returns (beta0, beta1, r_squared).");

  m.def(
      "run_mc_experiment",
      [](const std::string& config_json) {
        const McPlan plan = cli::mc_plan_from_json(nlohmann::json::parse(config_json), "<config>");
        return output_to_dict(run_mc_experiment(plan));
      },
      py::arg("config_json"), "Run a matrix-completion plan given as a JSON string.");
  m.def(
      "run_vicm_experiment",
      [](const std::string& config_json) {
        const VicmPlan plan =
            cli::vicm_plan_from_json(nlohmann::json::parse(config_json), "<config>");
        return output_to_dict(run_vicm_experiment(plan));
      },
      py::arg("config_json"), "Run a VICM plan given as a JSON string.");
}
