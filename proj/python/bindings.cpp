#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "trainopt/data.hpp"
#include "trainopt/driver.hpp"
#include "trainopt/errors.hpp"
#include "trainopt/harness.hpp"
#include "trainopt/metrics.hpp"
#include "trainopt/problems.hpp"
#include "trainopt/theory.hpp"

namespace py = pybind11;
using namespace trainopt;

namespace {

Batch to_batch(const std::vector<std::size_t>& idx) { return Batch(idx.begin(), idx.end()); }

}  // namespace

PYBIND11_MODULE(_trainopt, m) {
  m.doc() = "Trainable optimizers and benchmark harness";

  auto base_error = py::register_exception<Error>(m, "Error");
  py::register_exception<ConfigError>(m, "ConfigError", base_error.ptr());
  py::register_exception<InvalidArgument>(m, "InvalidArgument", base_error.ptr());

  py::class_<Schedule>(m, "Schedule")
      .def_static("constant", &Schedule::constant, py::arg("base"))
      .def_static("exp_decay", &Schedule::exp_decay, py::arg("base"), py::arg("decay_rate"))
      .def_static("inverse_t", &Schedule::inverse_t, py::arg("base"), py::arg("mu"),
                  py::arg("offset") = 0)
      .def_static("inverse_t_squared", &Schedule::inverse_t_squared, py::arg("base"),
                  py::arg("mu"), py::arg("offset") = 1)
      .def("value", &Schedule::value, py::arg("t"), py::arg("epoch") = 0);

  py::class_<FeasibleSet>(m, "FeasibleSet")
      .def_static("unconstrained", &FeasibleSet::unconstrained)
      .def_static("l2_ball", &FeasibleSet::l2_ball, py::arg("radius"))
      .def_readonly("radius", &FeasibleSet::radius)
      .def("bounded", &FeasibleSet::bounded);
  m.def("project", &project, py::arg("w"), py::arg("set"));

  py::class_<ToRates>(m, "ToRates")
      .def(py::init([](double a, double b, double g) { return ToRates{a, b, g}; }),
           py::arg("alpha"), py::arg("beta"), py::arg("gamma"))
      .def_readwrite("alpha", &ToRates::alpha)
      .def_readwrite("beta", &ToRates::beta)
      .def_readwrite("gamma", &ToRates::gamma);

  py::class_<FullLinearState>(m, "FullLinearState")
      .def_static("zeros", [](std::size_t d) { return FullLinearState::zeros(d); })
      .def_readwrite("a", &FullLinearState::a)
      .def_readwrite("b", &FullLinearState::b);
  py::class_<DiagLinearState>(m, "DiagLinearState")
      .def_static("zeros", &DiagLinearState::zeros)
      .def_readwrite("a", &DiagLinearState::a)
      .def_readwrite("b", &DiagLinearState::b);

  m.def(
      "step_pseudo_linear",
      [](const FullLinearState& s, const Vector& w, const Vector& g, const ToRates& r,
         const FeasibleSet& set) {
        auto out = step_pseudo_linear(s, w, g, r, set);
        return py::make_tuple(out.state, out.w, out.ghat);
      },
      py::arg("state"), py::arg("w"), py::arg("g"), py::arg("rates"),
      py::arg("set") = FeasibleSet::unconstrained());
  m.def(
      "step_diagonal",
      [](const DiagLinearState& s, const Vector& w, const Vector& g, const ToRates& r,
         const FeasibleSet& set) {
        auto out = step_diagonal(s, w, g, r, set);
        return py::make_tuple(out.state, out.w, out.ghat);
      },
      py::arg("state"), py::arg("w"), py::arg("g"), py::arg("rates"),
      py::arg("set") = FeasibleSet::unconstrained());

  py::class_<Optimizer>(m, "Optimizer")
      .def(py::init([](const std::string& kind, std::size_t dim, double gamma,
                       std::optional<double> alpha, std::optional<double> beta) {
             const auto k = parse_optimizer_kind(kind);
             if (!k) throw ConfigError("unknown optimizer '" + kind + "'");
             OptimizerSpec spec;
             spec.kind = *k;
             spec.gamma = Schedule::constant(gamma);
             if (alpha) spec.alpha = Schedule::constant(*alpha);
             if (beta) spec.beta = Schedule::constant(*beta);
             return Optimizer(spec, dim);
           }),
           py::arg("kind"), py::arg("dim"), py::arg("gamma") = 1e-3, py::arg("alpha") = py::none(),
           py::arg("beta") = py::none())
      .def(
          "step",
          [](Optimizer& opt, Vector w, const Vector& g, long long t, long long epoch) {
            const Vector ghat = opt.step(w, g, t, epoch);
            return py::make_tuple(w, ghat);
          },
          py::arg("w"), py::arg("g"), py::arg("t"), py::arg("epoch") = 0);

  py::class_<Problem>(m, "Problem")
      .def_property_readonly("dim", &Problem::dim)
      .def_property_readonly("num_samples", &Problem::num_samples)
      .def("full_loss", &Problem::full_loss)
      .def("full_grad", &Problem::full_grad)
      .def("minibatch_grad",
           [](const Problem& p, const Vector& w, const std::vector<std::size_t>& idx) {
             return p.minibatch_grad(w, to_batch(idx));
           })
      .def("optimum", &Problem::optimum)
      .def("strong_convexity", &Problem::strong_convexity)
      .def("lipschitz", &Problem::lipschitz);

  py::class_<QuadraticProblem, Problem>(m, "QuadraticProblem")
      .def(py::init([](std::size_t d, double kappa, std::size_t n, std::uint64_t seed,
                       double noise) {
             return QuadraticProblem(gen_quadratic(d, kappa, n, seed, noise));
           }),
           py::arg("dim"), py::arg("condition_number"), py::arg("num_samples"),
           py::arg("seed") = 0, py::arg("noise_scale") = 1.0);
  py::class_<LogisticProblem, Problem>(m, "LogisticProblem")
      .def(py::init([](const Matrix& x, const std::vector<int>& y, int k, double l2) {
             return LogisticProblem(LogisticSpec{x, y, k, l2});
           }),
           py::arg("features"), py::arg("labels"), py::arg("num_classes"), py::arg("l2") = 0.0);

  py::class_<Theorem1Report>(m, "Theorem1Report")
      .def_readonly("valid", &Theorem1Report::valid)
      .def_readonly("failed_conditions", &Theorem1Report::failed_conditions)
      .def_readonly("skipped_conditions", &Theorem1Report::skipped_conditions)
      .def_readonly("beta_lower_bound", &Theorem1Report::beta_lower_bound);
  m.def(
      "validate_theorem1",
      [](double gamma, double beta, double alpha, double mu, double c, double lipschitz,
         double a_bound, double radius) {
        return validate_theorem1(Theorem1Config{gamma, beta, alpha, mu}, c, lipschitz, a_bound,
                                 radius);
      },
      py::arg("gamma"), py::arg("beta"), py::arg("alpha"), py::arg("mu"), py::arg("c"),
      py::arg("lipschitz"), py::arg("a_bound"), py::arg("radius"));
  m.def("compute_DG", &compute_DG);
  m.def("compute_DA_Db", &compute_DA_Db);
  m.def("spectral_norm", [](const Matrix& a) { return spectral_norm(a); });
  m.def(
      "rate_fit",
      [](const std::vector<std::pair<double, double>>& series, double burn_in) {
        const auto f = rate_fit(series, burn_in);
        return py::make_tuple(f.slope, f.intercept, f.r_squared);
      },
      py::arg("series"), py::arg("burn_in_fraction") = 0.1);

  m.def("wald_significance", &wald_significance);

  m.def(
      "run_experiment",
      [](const std::string& config_json) {
        auto cfg = parse_config(config_json);
        validate_config(cfg);
        ExperimentResult res;
        {
          py::gil_scoped_release release;
          res = run_experiment(cfg);
        }
        return py::make_tuple(records_to_json(res.records), summary_to_json(res.summary));
      },
      py::arg("config_json"),
      "Runs a JSON experiment config; returns (records_json, summary_json).");
  m.def(
      "grid_size",
      [](const std::string& config_json) {
        auto cfg = parse_config(config_json);
        validate_config(cfg);
        return expand_grid(cfg).size();
      },
      py::arg("config_json"));
}
