#pragma once

// File formats: model-spec JSON, path and matrix CSV, fit JSON, truth JSON
// and the experiment config.

#include <filesystem>
#include <string>
#include <vector>

#include "hfsem/harness.hpp"

namespace hfsem {

namespace fs = std::filesystem;

inline constexpr const char* kSpecSchema = "hfsem-spec-v1";
inline constexpr const char* kFitSchema = "hfsem-fit-v1";
inline constexpr const char* kExperimentSchema = "hfsem-exp-v1";
inline constexpr const char* kTruthSchema = "hfsem-truth-v1";

std::string read_text(const fs::path& path);
void write_text(const fs::path& path, const std::string& text);

/// Parameter indices are 1-based in the file. Throws ConfigError on schema
/// problems and ShapeError on an inconsistent model.
SemSpec spec_from_json(const std::string& text);
std::string spec_to_json(const SemSpec& spec);
SemSpec load_spec(const fs::path& path);
/// "model1", "model2", "model3"; throws ConfigError otherwise.
SemSpec builtin_spec(const std::string& name);

/// Header "t,x1,...,xp"; with latents the columns xi*, delta*, eps*, zeta*,
/// eta* follow.
std::string path_to_csv(const PathBundle& bundle, bool with_latents);
/// Observations only: (n+1) x p, taken from the x1..xp columns.
MatrixXd path_from_csv(const std::string& text);

/// Headerless comma-separated rows.
std::string matrix_to_csv(const MatrixXd& m);
MatrixXd matrix_from_csv(const std::string& text);

/// All numbers in the file in reading order; a non-numeric first line is
/// treated as a header.
VectorXd vector_from_csv(const std::string& text);

std::string fit_to_json(const FitReport& fit, double T);
FitReport fit_from_json(const std::string& text);

std::string truth_to_json(const TrueModel& model);
TrueModel truth_from_json(const std::string& text);
/// "true4-6" or a path to a truth JSON file.
TrueModel resolve_truth(const std::string& id_or_path, const fs::path& base_dir = {});

/// Model entries are spec paths relative to the config's directory, or
/// "builtin:modelN".
ExperimentConfig experiment_from_json(const std::string& text, const fs::path& base_dir = {});
ExperimentConfig load_experiment(const fs::path& path);

std::string criteria_csv(const std::vector<CriteriaRow>& rows, const std::vector<double>& posterior,
                         std::size_t selected);

}  // namespace hfsem
