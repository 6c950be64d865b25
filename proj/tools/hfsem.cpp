// hfsem: simulate factor diffusions, fit candidate SEMs and compare them.

#include <fmt/format.h>

#include <CLI11.hpp>
#include <iostream>

#include "hfsem/errors.hpp"
#include "hfsem/io.hpp"
#include "hfsem/models.hpp"

using namespace hfsem;

namespace {

SemSpec spec_arg(const std::string& s) {
  if (s.rfind("builtin:", 0) == 0) return builtin_spec(s.substr(8));
  return load_spec(s);
}

OuScheme scheme_arg(const std::string& s) {
  if (s == "exact") return OuScheme::exact;
  if (s == "euler") return OuScheme::euler;
  throw ConfigError("scheme must be exact or euler");
}

std::string fmt_vec(const VectorXd& v) {
  std::string out;
  for (Index i = 0; i < v.size(); ++i) out += fmt::format("{}{}", i ? "," : "", v(i));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"High-frequency SEM: simulation, quasi-likelihood fitting and model selection"};
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate", "Simulate an observed path from a true model");
  std::string sim_model = "true4-6", sim_out, sim_scheme = "exact";
  Index sim_n = 0;
  double sim_T = 1.0;
  std::uint64_t sim_seed = 0;
  bool with_latents = false;
  sim->add_option("--model", sim_model, "true4-6 or a truth JSON file")->capture_default_str();
  sim->add_option("--n", sim_n, "Number of increments")->required()->check(CLI::PositiveNumber);
  sim->add_option("--T", sim_T, "Terminal time")->capture_default_str();
  sim->add_option("--seed", sim_seed, "Seed")->required();
  sim->add_option("--out", sim_out, "Output CSV")->required();
  sim->add_option("--scheme", sim_scheme, "exact or euler")->capture_default_str();
  sim->add_flag("--with-latents", with_latents, "Append latent factor columns");

  // quadvar
  auto* qvc = app.add_subcommand("quadvar", "Quadratic covariation of an observed path");
  std::string qv_in, qv_out;
  double qv_T = 1.0;
  qvc->add_option("--in", qv_in, "Path CSV")->required();
  qvc->add_option("--T", qv_T, "Terminal time")->capture_default_str();
  qvc->add_option("--out", qv_out, "Output p x p CSV")->required();

  // fit
  auto* fitc = app.add_subcommand("fit", "Quasi-maximum-likelihood fit of one model");
  std::string fit_spec, fit_data, fit_init, fit_out;
  double fit_T = 1.0;
  int fit_starts = 8;
  std::uint64_t fit_seed = 1;
  fitc->add_option("--spec", fit_spec, "Model spec JSON or builtin:modelN")->required();
  fitc->add_option("--data", fit_data, "Path CSV")->required();
  fitc->add_option("--T", fit_T, "Terminal time")->capture_default_str();
  fitc->add_option("--init", fit_init, "Starting theta CSV");
  fitc->add_option("--starts", fit_starts, "Number of starts")->capture_default_str()->check(CLI::PositiveNumber);
  fitc->add_option("--seed", fit_seed, "Seed for multistart draws")->capture_default_str();
  fitc->add_option("--out", fit_out, "Output fit JSON")->required();

  // criteria
  auto* crit = app.add_subcommand("criteria", "Information criteria and selection over fitted models");
  std::vector<std::string> crit_fits;
  std::string crit_name = "qbic2", crit_out;
  std::vector<double> crit_priors;
  crit->add_option("--fits", crit_fits, "Fit JSON files")->required();
  crit->add_option("--criterion", crit_name, "qbic1, qbic2 or qaic")->capture_default_str();
  crit->add_option("--priors", crit_priors, "Prior model probabilities (default equal)");
  crit->add_option("--out", crit_out, "Output CSV")->required();

  // table1
  auto* tab = app.add_subcommand("table1", "Run the selection-frequency experiment");
  std::string tab_config, tab_dir;
  int tab_threads = -1;
  bool tab_realistic = false;
  tab->add_option("--config", tab_config, "Experiment JSON")->required();
  tab->add_option("--out-dir", tab_dir, "Output directory")->required();
  tab->add_option("--threads", tab_threads, "Worker threads (overrides the config)");
  tab->add_flag("--realistic", tab_realistic, "Moment starts plus multistart instead of true-value starts");

  // gap
  auto* gap = app.add_subcommand("gap", "Criterion gap per observation between two models");
  std::string gap_config, gap_a = "model1", gap_b = "model3", gap_out;
  gap->add_option("--config", gap_config, "Experiment JSON")->required();
  gap->add_option("--a", gap_a, "Reference model id")->capture_default_str();
  gap->add_option("--b", gap_b, "Compared model id")->capture_default_str();
  gap->add_option("--out", gap_out, "Output JSON (stdout when omitted)");

  // identify
  auto* idc = app.add_subcommand("identify", "Rank and local-injectivity check");
  std::string id_spec, id_theta;
  int id_trials = 50;
  std::uint64_t id_seed = 1;
  idc->add_option("--spec", id_spec, "Model spec JSON or builtin:modelN")->required();
  idc->add_option("--theta", id_theta, "Theta CSV (default: the spec's reference theta)");
  idc->add_option("--trials", id_trials, "Injectivity probes")->capture_default_str();
  idc->add_option("--seed", id_seed, "Seed")->capture_default_str();

  // spec-export
  auto* exp = app.add_subcommand("spec-export", "Write a bundled model or the bundled truth as JSON");
  std::string exp_name, exp_out;
  exp->add_option("--model", exp_name, "model1, model2, model3 or true4-6")->required();
  exp->add_option("--out", exp_out, "Output JSON")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*sim) {
      SimOptions so;
      so.scheme = scheme_arg(sim_scheme);
      so.keep_latents = with_latents;
      const PathBundle b = simulate_custom(resolve_truth(sim_model), sim_n, sim_T, sim_seed, so);
      write_text(sim_out, path_to_csv(b, with_latents));
    } else if (*qvc) {
      const QuadVar qv = quad_var(path_from_csv(read_text(qv_in)), qv_T);
      write_text(qv_out, matrix_to_csv(qv.q_xx.matrix()));
    } else if (*fitc) {
      const SemSpec spec = spec_arg(fit_spec);
      const QuadVar qv = quad_var(path_from_csv(read_text(fit_data)), fit_T);
      std::optional<VectorXd> init;
      if (!fit_init.empty()) {
        init = vector_from_csv(read_text(fit_init));
        if (init->size() != spec.q()) {
          throw ConfigError(fmt::format("--init has {} values, the model has q = {}", init->size(), spec.q()));
        }
      }
      const FitReport r = fit_multistart(LikelihoodSurface(spec, qv), fit_starts, fit_seed, {}, init);
      write_text(fit_out, fit_to_json(r, fit_T));
      fmt::print("{}: H = {} converged = {} j_flag = {}\n", r.model_id, r.h_at_hat, r.converged, r.j_flag);
    } else if (*crit) {
      std::vector<CriteriaRow> rows;
      for (const auto& f : crit_fits) rows.push_back(criteria_row(fit_from_json(read_text(f))));
      const Criterion c = parse_criterion(crit_name);
      const auto post = posterior_probs(rows, c, crit_priors);
      const std::size_t best = select(rows, c);
      write_text(crit_out, criteria_csv(rows, post, best));
      fmt::print("selected by {}: {}\n", criterion_name(c), rows[best].model_id);
    } else if (*tab) {
      ExperimentConfig cfg = load_experiment(tab_config);
      if (tab_threads >= 0) cfg.threads = tab_threads;
      if (tab_realistic) cfg.init = InitMode::realistic;
      const ExperimentResult res = run_experiment(cfg);
      const fs::path dir(tab_dir);
      const std::string text = table_render(res.table, TableFormat::text);
      write_text(dir / "table.txt", text);
      write_text(dir / "table.csv", table_render(res.table, TableFormat::csv));
      write_text(dir / "replications.csv", replications_csv(res));
      std::cout << text;
      const auto bad = check_invariants(res);
      for (const auto& b : bad) fmt::print(stderr, "invariant violated: {}\n", b);
      if (!bad.empty()) return 3;
    } else if (*gap) {
      const ExperimentConfig cfg = load_experiment(gap_config);
      const GapProbe g = gap_growth_probe(cfg, gap_a, gap_b);
      std::string out = fmt::format(
          "{{\n \"model_a\": \"{}\",\n \"model_b\": \"{}\",\n \"level\": {},\n \"level_se\": {},\n"
          " \"analytic\": {},\n \"relative_error\": {},\n \"slope\": {},\n \"per_n\": [",
          g.model_a, g.model_b, g.level, g.level_se, g.analytic, g.relative_error, g.slope);
      for (std::size_t i = 0; i < g.n_values.size(); ++i) {
        out += fmt::format("{}\n  {{\"n\": {}, \"mean\": {}, \"se\": {}, \"used\": {}}}", i ? "," : "", g.n_values[i],
                           g.mean_gap_per_n[i], g.se_gap_per_n[i], g.used_per_n[i]);
      }
      out += "\n ]\n}\n";
      if (gap_out.empty()) {
        std::cout << out;
      } else {
        write_text(gap_out, out);
      }
    } else if (*idc) {
      const SemSpec spec = spec_arg(id_spec);
      VectorXd theta;
      if (!id_theta.empty()) {
        theta = vector_from_csv(read_text(id_theta));
      } else if (spec.reference_theta()) {
        theta = *spec.reference_theta();
      } else {
        throw ConfigError("the spec has no reference theta; pass --theta");
      }
      const auto r = check_identifiability(spec, theta, id_trials, id_seed);
      fmt::print("rank {} of {} ({})\n", r.rank, r.q, r.rank_ok ? "full" : "deficient");
      fmt::print("sign constraints {}\n", r.signs_ok ? "hold" : "violated");
      fmt::print("injectivity probes: {} of {} matched Sigma, {} witnesses\n", r.matched_trials, r.trials,
                 r.witnesses.size());
      for (const auto& w : r.witnesses) fmt::print("  witness {}\n", fmt_vec(w));
      if (!r.collinear_columns.empty()) {
        std::string cols;
        for (Index c : r.collinear_columns) cols += fmt::format(" {}", c + 1);
        fmt::print("collinear parameters:{}\n", cols);
      }
      fmt::print("{}\n", r.passed() ? "PASS" : "FAIL");
      return r.passed() ? 0 : 4;
    } else if (*exp) {
      if (exp_name == "true4-6") {
        write_text(exp_out, truth_to_json(true_model_4_6()));
      } else {
        write_text(exp_out, spec_to_json(builtin_spec(exp_name)));
      }
    }
  } catch (const std::exception& e) {
    fmt::print(stderr, "hfsem: {}\n", e.what());
    return 2;
  }
  return 0;
}
