#include "hfsem/io.hpp"

#include <fmt/format.h>

#include <array>
#include <charconv>
#include <fstream>
#include <sstream>

#include "hfsem/errors.hpp"
#include "hfsem/models.hpp"
#include "json.hpp"

namespace hfsem {

using nlohmann::json;

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw ConfigError("write failed for '" + path.string() + "'");
}

namespace {

json parse_json(const std::string& text, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string(what) + ": invalid JSON: " + e.what());
  }
}

void expect_schema(const json& j, const char* schema) {
  if (!j.is_object() || !j.contains("schema") || j.at("schema") != schema) {
    throw ConfigError(std::string("expected a document with schema \"") + schema + "\"");
  }
}

template <typename T>
T get_as(const json& j, const char* key, const char* what) {
  if (!j.contains(key)) throw ConfigError(std::string(what) + ": missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string(what) + ": bad field '" + key + "': " + e.what());
  }
}

json matrix_json(const MatrixXd& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Index k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
    rows.push_back(std::move(row));
  }
  return rows;
}

MatrixXd matrix_from(const json& j, Index rows, Index cols, const std::string& what) {
  if (!j.is_array() || static_cast<Index>(j.size()) != rows) {
    throw ConfigError(what + ": expected " + std::to_string(rows) + " rows");
  }
  MatrixXd m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    const json& row = j[static_cast<size_t>(i)];
    if (!row.is_array() || static_cast<Index>(row.size()) != cols) {
      throw ConfigError(what + ": row " + std::to_string(i + 1) + " must have " + std::to_string(cols) +
                        " entries");
    }
    for (Index k = 0; k < cols; ++k) {
      if (!row[static_cast<size_t>(k)].is_number()) throw ConfigError(what + ": non-numeric entry");
      m(i, k) = row[static_cast<size_t>(k)].get<double>();
    }
  }
  return m;
}

// Rows-of-rows matrix whose shape is read from the document.
MatrixXd matrix_any(const json& j, const std::string& what) {
  if (!j.is_array() || j.empty() || !j[0].is_array()) throw ConfigError(what + ": expected an array of rows");
  return matrix_from(j, static_cast<Index>(j.size()), static_cast<Index>(j[0].size()), what);
}

json vector_json(const VectorXd& v) {
  json a = json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

VectorXd vector_from(const json& j, const std::string& what) {
  if (!j.is_array()) throw ConfigError(what + ": expected an array");
  VectorXd v(static_cast<Index>(j.size()));
  for (size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ConfigError(what + ": non-numeric entry");
    v(static_cast<Index>(i)) = j[i].get<double>();
  }
  return v;
}

const char* constraint_name(SignConstraint c) {
  switch (c) {
    case SignConstraint::none: return "none";
    case SignConstraint::nonzero: return "nonzero";
    case SignConstraint::positive: return "positive";
  }
  return "none";
}

SignConstraint parse_constraint(const std::string& s) {
  if (s == "none") return SignConstraint::none;
  if (s == "nonzero") return SignConstraint::nonzero;
  if (s == "positive") return SignConstraint::positive;
  throw ConfigError("unknown constraint '" + s + "'");
}

constexpr std::array<PatternKind, kPatternCount> kAllKinds{
    PatternKind::lambda_x1,  PatternKind::lambda_x2, PatternKind::b_mat,    PatternKind::gamma_mat,
    PatternKind::sigma_xixi, PatternKind::sigma_dd,  PatternKind::sigma_ee, PatternKind::sigma_zz};

PatternMatrix& pattern_slot(SemPatterns& p, PatternKind kind) {
  switch (kind) {
    case PatternKind::lambda_x1: return p.lambda_x1;
    case PatternKind::lambda_x2: return p.lambda_x2;
    case PatternKind::b_mat: return p.b_mat;
    case PatternKind::gamma_mat: return p.gamma_mat;
    case PatternKind::sigma_xixi: return p.sigma_xixi;
    case PatternKind::sigma_dd: return p.sigma_dd;
    case PatternKind::sigma_ee: return p.sigma_ee;
    case PatternKind::sigma_zz: return p.sigma_zz;
  }
  return p.lambda_x1;
}

std::pair<Index, Index> pattern_shape(PatternKind kind, Index p1, Index p2, Index k1, Index k2) {
  switch (kind) {
    case PatternKind::lambda_x1: return {p1, k1};
    case PatternKind::lambda_x2: return {p2, k2};
    case PatternKind::b_mat: return {k2, k2};
    case PatternKind::gamma_mat: return {k2, k1};
    case PatternKind::sigma_xixi: return {k1, k1};
    case PatternKind::sigma_dd: return {p1, p1};
    case PatternKind::sigma_ee: return {p2, p2};
    case PatternKind::sigma_zz: return {k2, k2};
  }
  return {0, 0};
}

json pattern_json(const PatternMatrix& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Index k = 0; k < m.cols(); ++k) {
      const Cell& c = m.at(i, k);
      if (const auto* f = std::get_if<FixedCell>(&c)) {
        row.push_back({{"fixed", f->value}});
      } else {
        const auto& fr = std::get<FreeCell>(c);
        row.push_back({{"free", {{"index", fr.index + 1}, {"constraint", constraint_name(fr.constraint)}}}});
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

PatternMatrix pattern_from(const json& j, Index rows, Index cols, const std::string& name) {
  PatternMatrix m(rows, cols);
  if (rows == 0 || cols == 0) {
    if (!j.is_array()) throw ConfigError(name + ": expected an array");
    return m;
  }
  if (!j.is_array() || static_cast<Index>(j.size()) != rows) {
    throw ConfigError(name + ": expected " + std::to_string(rows) + " rows");
  }
  for (Index i = 0; i < rows; ++i) {
    const json& row = j[static_cast<size_t>(i)];
    if (!row.is_array() || static_cast<Index>(row.size()) != cols) {
      throw ConfigError(name + ": row " + std::to_string(i + 1) + " must have " + std::to_string(cols) + " cells");
    }
    for (Index k = 0; k < cols; ++k) {
      const json& cell = row[static_cast<size_t>(k)];
      if (cell.is_object() && cell.contains("fixed") && cell.size() == 1) {
        if (!cell["fixed"].is_number()) throw ConfigError(name + ": fixed value must be a number");
        m.set_fixed(i, k, cell["fixed"].get<double>());
      } else if (cell.is_object() && cell.contains("free") && cell.size() == 1) {
        const json& fr = cell["free"];
        if (!fr.is_object() || !fr.contains("index") || !fr["index"].is_number_integer()) {
          throw ConfigError(name + ": free cell needs an integer index");
        }
        const int index = fr["index"].get<int>();
        if (index < 1) throw ConfigError(name + ": parameter indices start at 1");
        const auto constraint =
            fr.contains("constraint") ? parse_constraint(fr["constraint"].get<std::string>()) : SignConstraint::none;
        m.set_free(i, k, index - 1, constraint);
      } else {
        throw ConfigError(name + ": cell must be {\"fixed\": v} or {\"free\": {...}}");
      }
    }
  }
  return m;
}

}  // namespace

SemSpec spec_from_json(const std::string& text) {
  const json j = parse_json(text, "spec");
  expect_schema(j, kSpecSchema);
  const json dims = j.contains("dims") ? j.at("dims") : json();
  if (!dims.is_object()) throw ConfigError("spec: missing 'dims'");
  const auto p1 = get_as<Index>(dims, "p1", "spec dims");
  const auto p2 = get_as<Index>(dims, "p2", "spec dims");
  const auto k1 = get_as<Index>(dims, "k1", "spec dims");
  const auto k2 = get_as<Index>(dims, "k2", "spec dims");
  if (p1 < 0 || p2 < 0 || k1 < 0 || k2 < 0) throw ConfigError("spec: negative dimension");

  SemPatterns patterns;
  for (PatternKind kind : kAllKinds) {
    const std::string name = pattern_name(kind);
    const auto [r, c] = pattern_shape(kind, p1, p2, k1, k2);
    if (!j.contains(name)) {
      if (r == 0 || c == 0) {
        pattern_slot(patterns, kind) = PatternMatrix(r, c);
        continue;
      }
      throw ConfigError("spec: missing pattern '" + name + "'");
    }
    pattern_slot(patterns, kind) = pattern_from(j.at(name), r, c, name);
  }

  std::optional<Bounds> bounds;
  if (j.contains("bounds")) {
    const json& b = j.at("bounds");
    if (!b.is_object() || !b.contains("lower") || !b.contains("upper")) {
      throw ConfigError("spec: bounds need 'lower' and 'upper' arrays");
    }
    bounds = Bounds{vector_from(b.at("lower"), "bounds.lower"), vector_from(b.at("upper"), "bounds.upper")};
  }
  std::optional<VectorXd> reference;
  if (j.contains("reference_theta")) reference = vector_from(j.at("reference_theta"), "reference_theta");
  const std::string id = j.contains("id") ? j.at("id").get<std::string>() : std::string("model");
  return SemSpec(id, std::move(patterns), std::move(bounds), std::move(reference));
}

std::string spec_to_json(const SemSpec& spec) {
  json j;
  j["schema"] = kSpecSchema;
  j["id"] = spec.id();
  j["dims"] = {{"p1", spec.p1()}, {"p2", spec.p2()}, {"k1", spec.k1()}, {"k2", spec.k2()}};
  for (PatternKind kind : kAllKinds) j[pattern_name(kind)] = pattern_json(spec.patterns().get(kind));
  j["bounds"] = {{"lower", vector_json(spec.bounds().lower)}, {"upper", vector_json(spec.bounds().upper)}};
  if (spec.reference_theta()) j["reference_theta"] = vector_json(*spec.reference_theta());
  return j.dump(1) + "\n";
}

SemSpec load_spec(const fs::path& path) {
  try {
    return spec_from_json(read_text(path));
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

SemSpec builtin_spec(const std::string& name) {
  if (name == "model1") return model1();
  if (name == "model2") return model2();
  if (name == "model3") return model3();
  throw ConfigError("unknown built-in model '" + name + "'");
}

// ---------------------------------------------------------------- CSV

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r' && ch != ' ' && ch != '\t') {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

std::optional<double> parse_double(const std::string& s) {
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  const char* first = s.data();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    out.push_back(line);
  }
  return out;
}

void append_row(std::string& out, const double* values, Index count) {
  for (Index k = 0; k < count; ++k) {
    if (k) out.push_back(',');
    out += fmt::format("{}", values[k]);
  }
  out.push_back('\n');
}

}  // namespace

std::string path_to_csv(const PathBundle& b, bool with_latents) {
  if (with_latents && !b.has_latents) throw ConfigError("path has no stored latents");
  std::string out = "t";
  for (Index k = 0; k < b.x_obs.cols(); ++k) out += fmt::format(",x{}", k + 1);
  const std::array<std::pair<const char*, const MatrixXd*>, 5> latents{
      {{"xi", &b.xi}, {"delta", &b.delta}, {"eps", &b.eps}, {"zeta", &b.zeta}, {"eta", &b.eta}}};
  if (with_latents) {
    for (const auto& [name, m] : latents) {
      for (Index k = 0; k < m->cols(); ++k) out += fmt::format(",{}{}", name, k + 1);
    }
  }
  out.push_back('\n');
  std::vector<double> row;
  for (Index i = 0; i < b.x_obs.rows(); ++i) {
    row.clear();
    row.push_back(static_cast<double>(i) * b.h);
    for (Index k = 0; k < b.x_obs.cols(); ++k) row.push_back(b.x_obs(i, k));
    if (with_latents) {
      for (const auto& [name, m] : latents) {
        for (Index k = 0; k < m->cols(); ++k) row.push_back((*m)(i, k));
      }
    }
    append_row(out, row.data(), static_cast<Index>(row.size()));
  }
  return out;
}

MatrixXd path_from_csv(const std::string& text) {
  const auto lines = lines_of(text);
  if (lines.empty()) throw ConfigError("path CSV is empty");
  const auto header = split_line(lines[0]);
  std::vector<size_t> x_cols;
  for (Index k = 1;; ++k) {
    const std::string name = "x" + std::to_string(k);
    size_t found = header.size();
    for (size_t c = 0; c < header.size(); ++c) {
      if (header[c] == name) found = c;
    }
    if (found == header.size()) break;
    x_cols.push_back(found);
  }
  if (x_cols.empty()) throw ConfigError("path CSV: header has no x1 column");
  MatrixXd x(static_cast<Index>(lines.size() - 1), static_cast<Index>(x_cols.size()));
  for (size_t i = 1; i < lines.size(); ++i) {
    const auto fields = split_line(lines[i]);
    if (fields.size() != header.size()) {
      throw ConfigError("path CSV: line " + std::to_string(i + 1) + " has " + std::to_string(fields.size()) +
                        " fields, header has " + std::to_string(header.size()));
    }
    for (size_t k = 0; k < x_cols.size(); ++k) {
      const auto v = parse_double(fields[x_cols[k]]);
      if (!v) throw ConfigError("path CSV: non-numeric value on line " + std::to_string(i + 1));
      x(static_cast<Index>(i - 1), static_cast<Index>(k)) = *v;
    }
  }
  return x;
}

std::string matrix_to_csv(const MatrixXd& m) {
  std::string out;
  std::vector<double> row(static_cast<size_t>(m.cols()));
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index k = 0; k < m.cols(); ++k) row[static_cast<size_t>(k)] = m(i, k);
    append_row(out, row.data(), m.cols());
  }
  return out;
}

MatrixXd matrix_from_csv(const std::string& text) {
  const auto lines = lines_of(text);
  if (lines.empty()) throw ConfigError("matrix CSV is empty");
  const size_t cols = split_line(lines[0]).size();
  MatrixXd m(static_cast<Index>(lines.size()), static_cast<Index>(cols));
  for (size_t i = 0; i < lines.size(); ++i) {
    const auto fields = split_line(lines[i]);
    if (fields.size() != cols) throw ConfigError("matrix CSV: ragged rows");
    for (size_t k = 0; k < cols; ++k) {
      const auto v = parse_double(fields[k]);
      if (!v) throw ConfigError("matrix CSV: non-numeric value on line " + std::to_string(i + 1));
      m(static_cast<Index>(i), static_cast<Index>(k)) = *v;
    }
  }
  return m;
}

VectorXd vector_from_csv(const std::string& text) {
  const auto lines = lines_of(text);
  std::vector<double> values;
  for (size_t i = 0; i < lines.size(); ++i) {
    const auto fields = split_line(lines[i]);
    std::vector<double> row;
    bool numeric = true;
    for (const auto& f : fields) {
      const auto v = parse_double(f);
      if (!v) {
        numeric = false;
        break;
      }
      row.push_back(*v);
    }
    if (!numeric) {
      if (i == 0) continue;
      throw ConfigError("vector CSV: non-numeric value on line " + std::to_string(i + 1));
    }
    values.insert(values.end(), row.begin(), row.end());
  }
  return Eigen::Map<const VectorXd>(values.data(), static_cast<Index>(values.size()));
}

// ---------------------------------------------------------------- fit

std::string fit_to_json(const FitReport& f, double T) {
  json j;
  j["schema"] = kFitSchema;
  j["model_id"] = f.model_id;
  j["q"] = f.q;
  j["n"] = f.n;
  j["T"] = T;
  j["theta_hat"] = vector_json(f.theta_hat);
  j["h_at_hat"] = f.h_at_hat;
  j["grad_norm"] = f.grad_norm;
  j["hessian_ok"] = f.hessian_ok;
  j["hessian"] = matrix_json(f.hessian.matrix());
  j["j_flag"] = f.j_flag;
  j["gamma_tilde"] = matrix_json(f.gamma_tilde.matrix());
  j["iterations"] = f.iterations;
  j["restarts"] = f.restarts;
  j["converged"] = f.converged;
  j["boundary_hit"] = f.boundary_hit;
  return j.dump(1) + "\n";
}

FitReport fit_from_json(const std::string& text) {
  const json j = parse_json(text, "fit");
  expect_schema(j, kFitSchema);
  FitReport f;
  f.model_id = get_as<std::string>(j, "model_id", "fit");
  f.q = get_as<Index>(j, "q", "fit");
  f.n = get_as<Index>(j, "n", "fit");
  if (f.q < 0 || f.n < 1) throw ConfigError("fit: q must be >= 0 and n >= 1");
  f.theta_hat = vector_from(j.at("theta_hat"), "theta_hat");
  if (f.theta_hat.size() != f.q) throw ConfigError("fit: theta_hat length differs from q");
  f.h_at_hat = get_as<double>(j, "h_at_hat", "fit");
  f.grad_norm = get_as<double>(j, "grad_norm", "fit");
  f.hessian_ok = get_as<bool>(j, "hessian_ok", "fit");
  f.j_flag = get_as<bool>(j, "j_flag", "fit");
  if (f.q > 0) {
    f.hessian = SymMatrix::from(matrix_from(j.at("hessian"), f.q, f.q, "hessian"));
    f.gamma_tilde = SymMatrix::from(matrix_from(j.at("gamma_tilde"), f.q, f.q, "gamma_tilde"));
  } else {
    f.hessian = SymMatrix(0);
    f.gamma_tilde = SymMatrix(0);
  }
  f.iterations = get_as<int>(j, "iterations", "fit");
  f.restarts = get_as<int>(j, "restarts", "fit");
  f.converged = get_as<bool>(j, "converged", "fit");
  f.boundary_hit = get_as<bool>(j, "boundary_hit", "fit");
  return f;
}

// ---------------------------------------------------------------- truth

namespace {

json block_json(const OuBlock& b) {
  return {{"mean_reversion", matrix_json(b.mean_reversion)},
          {"level", vector_json(b.level)},
          {"dispersion", matrix_json(b.dispersion)},
          {"init", vector_json(b.init)}};
}

OuBlock block_from(const json& j, const std::string& name) {
  if (!j.is_object()) throw ConfigError("truth: block '" + name + "' must be an object");
  OuBlock b;
  b.level = vector_from(j.at("level"), name + ".level");
  const Index d = b.level.size();
  b.mean_reversion = d ? matrix_from(j.at("mean_reversion"), d, d, name + ".mean_reversion") : MatrixXd(0, 0);
  b.dispersion = d ? matrix_any(j.at("dispersion"), name + ".dispersion") : MatrixXd(0, 0);
  b.init = j.contains("init") ? vector_from(j.at("init"), name + ".init") : VectorXd::Zero(d);
  b.validate();
  return b;
}

}  // namespace

std::string truth_to_json(const TrueModel& m) {
  json j;
  j["schema"] = kTruthSchema;
  j["xi"] = block_json(m.xi);
  j["delta"] = block_json(m.delta);
  j["eps"] = block_json(m.eps);
  j["zeta"] = block_json(m.zeta);
  j["lambda_x1"] = matrix_json(m.lambda_x1);
  j["lambda_x2"] = matrix_json(m.lambda_x2);
  j["b_mat"] = matrix_json(m.b_mat);
  j["gamma_mat"] = matrix_json(m.gamma_mat);
  return j.dump(1) + "\n";
}

namespace {

TrueModel truth_from(const json& j) {
  expect_schema(j, kTruthSchema);
  TrueModel m;
  try {
    m.xi = block_from(j.at("xi"), "xi");
    m.delta = block_from(j.at("delta"), "delta");
    m.eps = block_from(j.at("eps"), "eps");
    m.zeta = block_from(j.at("zeta"), "zeta");
    const Index p1 = m.delta.dim(), p2 = m.eps.dim(), k1 = m.xi.dim(), k2 = m.zeta.dim();
    m.lambda_x1 = matrix_from(j.at("lambda_x1"), p1, k1, "lambda_x1");
    m.lambda_x2 = p2 ? matrix_from(j.at("lambda_x2"), p2, k2, "lambda_x2") : MatrixXd(0, k2);
    m.b_mat = k2 ? matrix_from(j.at("b_mat"), k2, k2, "b_mat") : MatrixXd(0, 0);
    m.gamma_mat = k2 ? matrix_from(j.at("gamma_mat"), k2, k1, "gamma_mat") : MatrixXd(0, k1);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("truth: ") + e.what());
  }
  m.validate();
  return m;
}

}  // namespace

TrueModel truth_from_json(const std::string& text) { return truth_from(parse_json(text, "truth")); }

TrueModel resolve_truth(const std::string& id_or_path, const fs::path& base_dir) {
  if (id_or_path == "true4-6") return true_model_4_6();
  fs::path path(id_or_path);
  if (path.is_relative() && !base_dir.empty()) path = base_dir / path;
  if (!fs::exists(path)) throw ConfigError("unknown true model '" + id_or_path + "'");
  return truth_from_json(read_text(path));
}

// ---------------------------------------------------------------- experiment

ExperimentConfig experiment_from_json(const std::string& text, const fs::path& base_dir) {
  const json j = parse_json(text, "experiment");
  expect_schema(j, kExperimentSchema);
  const char* what = "experiment";
  ExperimentConfig c;
  c.n_values = get_as<std::vector<Index>>(j, "n_values", what);
  if (j.contains("T")) c.T = get_as<double>(j, "T", what);
  if (j.contains("replications")) c.replications = get_as<int>(j, "replications", what);
  if (j.contains("master_seed")) c.master_seed = get_as<std::uint64_t>(j, "master_seed", what);
  if (j.contains("starts")) c.starts = get_as<int>(j, "starts", what);
  if (j.contains("threads")) c.threads = get_as<int>(j, "threads", what);
  if (j.contains("identify_trials")) c.identify_trials = get_as<int>(j, "identify_trials", what);
  if (j.contains("priors")) c.priors = get_as<std::vector<double>>(j, "priors", what);

  if (j.contains("criteria")) {
    c.criteria.clear();
    for (const auto& name : get_as<std::vector<std::string>>(j, "criteria", what)) {
      c.criteria.push_back(parse_criterion(name));
    }
  }
  if (j.contains("init")) {
    const auto mode = get_as<std::string>(j, "init", what);
    if (mode == "true-value") {
      c.init = InitMode::true_value;
    } else if (mode == "realistic") {
      c.init = InitMode::realistic;
    } else {
      throw ConfigError("experiment: init must be \"true-value\" or \"realistic\"");
    }
  }
  if (j.contains("scheme")) {
    const auto s = get_as<std::string>(j, "scheme", what);
    if (s == "exact") {
      c.scheme = OuScheme::exact;
    } else if (s == "euler") {
      c.scheme = OuScheme::euler;
    } else {
      throw ConfigError("experiment: scheme must be \"exact\" or \"euler\"");
    }
  }
  if (j.contains("true_model")) {
    const json& t = j.at("true_model");
    if (t.is_string()) {
      c.true_model_id = t.get<std::string>();
      c.true_model = resolve_truth(c.true_model_id, base_dir);
    } else {
      c.true_model_id = "custom";
      c.true_model = truth_from(t);
    }
  }
  const auto entries = get_as<std::vector<std::string>>(j, "model_spec_paths", what);
  for (const auto& e : entries) {
    if (e.rfind("builtin:", 0) == 0) {
      c.models.push_back(builtin_spec(e.substr(8)));
    } else {
      fs::path path(e);
      if (path.is_relative() && !base_dir.empty()) path = base_dir / path;
      c.models.push_back(load_spec(path));
    }
  }
  if (j.contains("fit")) {
    const json& f = j.at("fit");
    if (f.contains("max_iterations")) c.fit_options.max_iterations = f.at("max_iterations").get<int>();
    if (f.contains("grad_tol")) c.fit_options.grad_tol = f.at("grad_tol").get<double>();
    if (f.contains("log_variances")) c.fit_options.log_variances = f.at("log_variances").get<bool>();
    if (f.contains("polish_steps")) c.fit_options.polish_steps = f.at("polish_steps").get<int>();
  }
  c.validate();
  return c;
}

ExperimentConfig load_experiment(const fs::path& path) {
  return experiment_from_json(read_text(path), path.parent_path());
}

std::string criteria_csv(const std::vector<CriteriaRow>& rows, const std::vector<double>& posterior,
                         std::size_t selected) {
  std::string out = "model_id,q,n,h_at_hat,qbic1,qbic2,qaic,j_flag,posterior_prob,selected\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    out += fmt::format("{},{},{},{},{},{},{},{},{},{}\n", r.model_id, r.q, r.n, r.h_at_hat, r.qbic1, r.qbic2,
                       r.qaic, r.j_flag ? 1 : 0, posterior[i], i == selected ? 1 : 0);
  }
  return out;
}

}  // namespace hfsem
