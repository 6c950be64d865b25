#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "hfsem/errors.hpp"
#include "hfsem/harness.hpp"
#include "hfsem/io.hpp"
#include "hfsem/models.hpp"

namespace py = pybind11;
using namespace hfsem;

namespace {

SymMatrix sym(const MatrixXd& m) { return SymMatrix::from_lower(m); }

OuScheme parse_scheme(const std::string& s) {
  if (s == "exact") return OuScheme::exact;
  if (s == "euler") return OuScheme::euler;
  throw ConfigError("unknown scheme '" + s + "' (exact|euler)");
}

std::vector<CriteriaRow> rows_of(const std::vector<FitReport>& fits) {
  std::vector<CriteriaRow> rows;
  for (const auto& f : fits) rows.push_back(criteria_row(f));
  return rows;
}

py::dict row_dict(const CriteriaRow& r) {
  py::dict d;
  d["model_id"] = r.model_id;
  d["q"] = r.q;
  d["n"] = r.n;
  d["h_at_hat"] = r.h_at_hat;
  d["qbic1"] = r.qbic1;
  d["qbic2"] = r.qbic2;
  d["qaic"] = r.qaic;
  d["j_flag"] = r.j_flag;
  d["logdet_gamma_tilde"] = r.logdet_gamma_tilde;
  return d;
}

}  // namespace

PYBIND11_MODULE(_hfsem, m) {
  m.doc() = "Quasi-likelihood SEM fitting and model selection for high-frequency data";

  py::register_exception<Error>(m, "HfsemError", PyExc_ValueError);

  py::class_<SemSpec>(m, "Spec")
      .def_property_readonly("id", &SemSpec::id)
      .def_property_readonly("q", &SemSpec::q)
      .def_property_readonly("p", &SemSpec::p)
      .def_property_readonly("reference_theta", &SemSpec::reference_theta)
      .def("to_json", [](const SemSpec& s) { return spec_to_json(s); })
      .def("__repr__", [](const SemSpec& s) {
        return "<Spec " + s.id() + " p=" + std::to_string(s.p()) + " q=" + std::to_string(s.q()) + ">";
      });

  m.def("builtin_spec", &builtin_spec, py::arg("name"), "model1, model2 or model3");
  m.def("load_spec", [](const std::string& path) { return load_spec(path); }, py::arg("path"));
  m.def("spec_from_json", &spec_from_json, py::arg("text"));

  m.def(
      "simulate",
      [](Index n, double T, std::uint64_t seed, const std::string& scheme, const std::string& model) {
        SimOptions so;
        so.scheme = parse_scheme(scheme);
        so.keep_latents = false;
        return simulate_custom(resolve_truth(model), n, T, seed, so).x_obs;
      },
      py::arg("n"), py::arg("T") = 1.0, py::arg("seed") = 1, py::arg("scheme") = "exact",
      py::arg("model") = "true4-6", "Observed path, (n+1) x p.");

  m.def("sigma0", [](const std::string& model) { return resolve_truth(model).sigma0().matrix(); },
        py::arg("model") = "true4-6", "Diffusion covariance of the observed process under the truth.");

  m.def("quad_var", [](const MatrixXd& x, double T) { return quad_var(x, T).q_xx.matrix(); }, py::arg("x"),
        py::arg("T") = 1.0);

  m.def("implied_cov", [](const SemSpec& s, const VectorXd& t) { return implied_cov(s, t).sigma().matrix(); },
        py::arg("spec"), py::arg("theta"));
  m.def("jacobian_delta", &jacobian_delta, py::arg("spec"), py::arg("theta"));

  m.def(
      "h_n",
      [](const SemSpec& s, const MatrixXd& stat, double n, const VectorXd& t) {
        return h_n(LikelihoodSurface(s, sym(stat), n), t);
      },
      py::arg("spec"), py::arg("q_xx"), py::arg("n"), py::arg("theta"));
  m.def(
      "grad_h_n",
      [](const SemSpec& s, const MatrixXd& stat, double n, const VectorXd& t) {
        return grad_h_n(LikelihoodSurface(s, sym(stat), n), t);
      },
      py::arg("spec"), py::arg("q_xx"), py::arg("n"), py::arg("theta"));

  py::class_<FitReport>(m, "FitReport")
      .def_readonly("model_id", &FitReport::model_id)
      .def_readonly("q", &FitReport::q)
      .def_readonly("n", &FitReport::n)
      .def_readonly("theta_hat", &FitReport::theta_hat)
      .def_readonly("h_at_hat", &FitReport::h_at_hat)
      .def_readonly("grad_norm", &FitReport::grad_norm)
      .def_property_readonly("hessian", [](const FitReport& f) { return f.hessian.matrix(); })
      .def_readonly("hessian_ok", &FitReport::hessian_ok)
      .def_readonly("j_flag", &FitReport::j_flag)
      .def_property_readonly("gamma_tilde", [](const FitReport& f) { return f.gamma_tilde.matrix(); })
      .def_readonly("iterations", &FitReport::iterations)
      .def_readonly("restarts", &FitReport::restarts)
      .def_readonly("converged", &FitReport::converged)
      .def_readonly("boundary_hit", &FitReport::boundary_hit)
      .def("to_json", [](const FitReport& f, double T) { return fit_to_json(f, T); }, py::arg("T") = 1.0);

  m.def(
      "fit",
      [](const SemSpec& s, const MatrixXd& stat, double n, std::optional<VectorXd> init, int starts,
         std::uint64_t seed) {
        const LikelihoodSurface surface(s, sym(stat), n);
        if (init && starts == 1) return fit(surface, *init);
        return fit_multistart(surface, starts, seed, {}, init);
      },
      py::arg("spec"), py::arg("q_xx"), py::arg("n"), py::arg("init") = py::none(), py::arg("starts") = 8,
      py::arg("seed") = 1, py::call_guard<py::gil_scoped_release>());

  m.def("criteria", [](const FitReport& f) { return row_dict(criteria_row(f)); }, py::arg("report"));
  m.def(
      "posterior_probs",
      [](const std::vector<FitReport>& fits, const std::string& c, const std::vector<double>& priors) {
        return posterior_probs(rows_of(fits), parse_criterion(c), priors);
      },
      py::arg("reports"), py::arg("criterion") = "qbic2", py::arg("priors") = std::vector<double>{});
  m.def(
      "select",
      [](const std::vector<FitReport>& fits, const std::string& c) { return select(rows_of(fits), parse_criterion(c)); },
      py::arg("reports"), py::arg("criterion") = "qbic2");

  m.def(
      "gamma_zero",
      [](const SemSpec& s, const VectorXd& t, const MatrixXd& sigma) {
        return gamma_zero(s, t, sym(sigma)).gamma0.matrix();
      },
      py::arg("spec"), py::arg("theta0"), py::arg("sigma0"));

  m.def(
      "limit_optimum",
      [](const SemSpec& s, const MatrixXd& sigma) {
        const LimitOptimum l = limit_optimum(s, sym(sigma));
        return py::make_tuple(l.theta_bar, l.h0_value);
      },
      py::arg("spec"), py::arg("sigma0"), "(theta_bar, H0 at theta_bar)");

  m.def(
      "run_experiment",
      [](const std::string& config_json, const std::string& base_dir) {
        const ExperimentConfig c = experiment_from_json(config_json, base_dir);
        ExperimentResult r;
        {
          py::gil_scoped_release release;
          r = run_experiment(c);
        }
        py::dict d;
        d["counts"] = r.table.counts;
        d["failures"] = r.table.failures;
        d["model_ids"] = r.table.model_ids;
        d["table"] = table_render(r.table, TableFormat::text);
        d["table_csv"] = table_render(r.table, TableFormat::csv);
        d["replications_csv"] = replications_csv(r);
        d["invariant_violations"] = check_invariants(r);
        return d;
      },
      py::arg("config_json"), py::arg("base_dir") = "");
}
