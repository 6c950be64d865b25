#pragma once

// Monte Carlo driver: simulate, fit every candidate, score, tally.

#include <cstdint>
#include <string>
#include <vector>

#include "hfsem/diffsim.hpp"
#include "hfsem/infocrit.hpp"

namespace hfsem {

enum class InitMode {
  /// Start each fit at the model's limit optimum against the truth, which is
  /// the true parameter for a correctly specified model.
  true_value,
  /// Moment start plus Latin-hypercube multistart.
  realistic,
};

struct ExperimentConfig {
  std::vector<Index> n_values;
  double T = 1.0;
  int replications = 200;
  std::uint64_t master_seed = 1;
  std::vector<SemSpec> models;
  std::vector<Criterion> criteria{Criterion::qbic1, Criterion::qbic2, Criterion::qaic};
  int starts = 8;  // realistic mode only
  InitMode init = InitMode::true_value;
  std::string true_model_id = "true4-6";
  TrueModel true_model = true_model_4_6();
  OuScheme scheme = OuScheme::exact;
  std::vector<double> priors;  // empty means equal
  int threads = 0;             // 0: hardware concurrency
  int identify_trials = 5;     // injectivity probes per model at load
  FitOptions fit_options;

  /// Throws ConfigError on any violated precondition.
  void validate() const;
};

/// Per-model state derived once from the truth: the limit optimum and the
/// identifiability verdict at it.
struct PreparedModel {
  SemSpec spec;
  VectorXd theta_bar;
  double h0_value = 0.0;
  IdentifiabilityReport identifiability;
};

/// Validates the config and computes each model's limit optimum. Throws
/// ConfigError when a model fails the identifiability check.
std::vector<PreparedModel> prepare_models(const ExperimentConfig& config);

std::uint64_t replication_seed(std::uint64_t master_seed, Index n, int rep);

struct ReplicationRecord {
  int rep = 0;
  Index n = 0;
  std::uint64_t seed = 0;
  bool failed = false;
  std::string failure;             // first error message when failed
  std::vector<CriteriaRow> rows;   // one per model, in config order
  std::vector<bool> converged;     // one per model
  std::vector<bool> fit_ok;        // one per model
  std::vector<int> selected;       // one per criterion, -1 when failed
};

struct SelectionTable {
  std::vector<Index> n_values;
  std::vector<std::string> model_ids;
  std::vector<Criterion> criteria;
  int replications = 0;
  /// counts[c][i][m]: criterion c, n_values[i], model m.
  std::vector<std::vector<std::vector<int>>> counts;
  std::vector<int> failures;           // per n
  std::vector<double> seconds_per_n;   // wall-clock per n
};

struct ExperimentResult {
  SelectionTable table;
  std::vector<ReplicationRecord> log;  // ordered by n, then rep
  std::vector<PreparedModel> prepared;
};

/// One replication at one sample size. Never throws on fit failures.
ReplicationRecord run_replication(const ExperimentConfig& config,
                                  const std::vector<PreparedModel>& prepared, Index n, int rep);

/// Deterministic given master_seed regardless of the thread count.
ExperimentResult run_experiment(const ExperimentConfig& config);
ExperimentResult run_experiment(const ExperimentConfig& config, const std::vector<PreparedModel>& prepared);

/// Violations of counts conservation and seed distinctness; empty when all
/// hold.
std::vector<std::string> check_invariants(const ExperimentResult& result);

enum class TableFormat { text, csv };
std::string table_render(const SelectionTable& table, TableFormat format);
std::string replications_csv(const ExperimentResult& result);

struct GapProbe {
  std::string model_a, model_b;
  std::vector<Index> n_values;
  std::vector<double> mean_gap_per_n;  // mean of (QBIC1_b - QBIC1_a)/n at each n
  std::vector<double> se_gap_per_n;
  std::vector<int> used_per_n;         // replications without a failure
  double level = 0.0;                  // pooled mean across n and replications
  double level_se = 0.0;
  double slope = 0.0;                  // of the mean gap/n against log n
  double analytic = 0.0;               // 2 (H0_a(theta_bar_a) - H0_b(theta_bar_b))
  double relative_error = 0.0;         // |level - analytic| / |analytic|
};

/// Regresses (QBIC1_b - QBIC1_a)/n on a constant across the config's
/// n_values and replications. Models are looked up by id in the config.
GapProbe gap_growth_probe(const ExperimentConfig& config, const std::string& model_a,
                          const std::string& model_b);

}  // namespace hfsem
