#include "hfsem/harness.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <set>
#include <thread>

#include "hfsem/errors.hpp"
#include "hfsem/rng.hpp"

namespace hfsem {

void ExperimentConfig::validate() const {
  if (replications < 1) throw ConfigError("replications must be >= 1");
  if (n_values.empty()) throw ConfigError("n_values must not be empty");
  for (Index n : n_values) {
    if (n < 2) throw ConfigError("every n must be >= 2");
  }
  if (!(T > 0.0) || !std::isfinite(T)) throw ConfigError("T must be positive");
  if (criteria.empty()) throw ConfigError("criteria must not be empty");
  if (models.empty()) throw ConfigError("at least one model is required");
  if (starts < 1) throw ConfigError("starts must be >= 1");
  if (threads < 0) throw ConfigError("threads must be >= 0");
  std::set<std::string> ids;
  for (const auto& m : models) {
    if (!ids.insert(m.id()).second) throw ConfigError("duplicate model id '" + m.id() + "'");
    if (m.p() != true_model.p()) {
      throw ConfigError("model '" + m.id() + "' has p = " + std::to_string(m.p()) +
                        " but the true model has p = " + std::to_string(true_model.p()));
    }
  }
  if (!priors.empty() && priors.size() != models.size()) throw ConfigError("one prior per model required");
  true_model.validate();
}

std::vector<PreparedModel> prepare_models(const ExperimentConfig& config) {
  config.validate();
  const SymMatrix sigma0 = config.true_model.sigma0();
  std::vector<PreparedModel> out;
  for (const auto& spec : config.models) {
    LimitOptimum lo = limit_optimum(spec, sigma0);
    IdentifiabilityReport idr = check_identifiability(spec, lo.theta_bar, config.identify_trials);
    // Sign constraints are an identifiability device; a limit optimum that
    // sits at zero for a "nonzero" loading is reported by the rank check.
    if (!idr.rank_ok || !idr.witnesses.empty()) {
      throw ConfigError(fmt::format("model '{}' is not identified at its limit optimum (rank {} of {}, {} witnesses)",
                                    spec.id(), idr.rank, idr.q, idr.witnesses.size()));
    }
    out.push_back({spec, std::move(lo.theta_bar), lo.h0_value, std::move(idr)});
  }
  return out;
}

std::uint64_t replication_seed(std::uint64_t master_seed, Index n, int rep) {
  return split_seed(master_seed, {static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(rep)});
}

ReplicationRecord run_replication(const ExperimentConfig& config, const std::vector<PreparedModel>& prepared,
                                  Index n, int rep) {
  ReplicationRecord rec;
  rec.rep = rep;
  rec.n = n;
  rec.seed = replication_seed(config.master_seed, n, rep);
  const std::size_t m = prepared.size();
  rec.rows.resize(m);
  rec.converged.assign(m, false);
  rec.fit_ok.assign(m, false);
  rec.selected.assign(config.criteria.size(), -1);

  QuadVar qv;
  try {
    SimOptions so;
    so.scheme = config.scheme;
    so.keep_latents = false;
    const PathBundle path = simulate_custom(config.true_model, n, config.T, rec.seed, so);
    qv = quad_var(path.x_obs, config.T);
  } catch (const std::exception& e) {
    rec.failed = true;
    rec.failure = std::string("simulation: ") + e.what();
    return rec;
  }

  for (std::size_t k = 0; k < m; ++k) {
    const auto& pm = prepared[k];
    rec.rows[k].model_id = pm.spec.id();
    rec.rows[k].q = pm.spec.q();
    rec.rows[k].n = n;
    try {
      const LikelihoodSurface surface(pm.spec, qv);
      const FitReport fr = config.init == InitMode::true_value
                               ? fit(surface, pm.theta_bar, config.fit_options)
                               : fit_multistart(surface, config.starts, split_seed(rec.seed, {0x51a7ULL, k}),
                                                config.fit_options);
      rec.rows[k] = criteria_row(fr);
      rec.converged[k] = fr.converged;
      rec.fit_ok[k] = true;
    } catch (const std::exception& e) {
      if (!rec.failed) rec.failure = pm.spec.id() + ": " + e.what();
      rec.failed = true;
    }
  }
  if (!rec.failed) {
    for (std::size_t c = 0; c < config.criteria.size(); ++c) {
      rec.selected[c] = static_cast<int>(select(rec.rows, config.criteria[c]));
    }
  }
  return rec;
}

namespace {

unsigned worker_count(int requested, std::size_t jobs) {
  unsigned w = requested > 0 ? static_cast<unsigned>(requested) : std::max(1u, std::thread::hardware_concurrency());
  return static_cast<unsigned>(std::min<std::size_t>(w, std::max<std::size_t>(jobs, 1)));
}

// Runs fn(i) for i in [0, jobs) on a pool; results land in their own slots.
template <typename Fn>
void parallel_for(std::size_t jobs, unsigned workers, Fn&& fn) {
  std::atomic<std::size_t> next{0};
  auto body = [&] {
    for (std::size_t i = next++; i < jobs; i = next++) fn(i);
  };
  if (workers <= 1) {
    body();
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) pool.emplace_back(body);
  for (auto& t : pool) t.join();
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config) {
  return run_experiment(config, prepare_models(config));
}

ExperimentResult run_experiment(const ExperimentConfig& config, const std::vector<PreparedModel>& prepared) {
  config.validate();
  if (prepared.size() != config.models.size()) throw ConfigError("prepared models do not match the config");
  ExperimentResult res;
  res.prepared = prepared;
  SelectionTable& t = res.table;
  t.n_values = config.n_values;
  t.criteria = config.criteria;
  t.replications = config.replications;
  for (const auto& pm : prepared) t.model_ids.push_back(pm.spec.id());
  const std::size_t nn = config.n_values.size(), mm = prepared.size();
  t.counts.assign(config.criteria.size(), std::vector<std::vector<int>>(nn, std::vector<int>(mm, 0)));
  t.failures.assign(nn, 0);
  t.seconds_per_n.assign(nn, 0.0);

  const auto reps = static_cast<std::size_t>(config.replications);
  res.log.resize(nn * reps);
  const unsigned workers = worker_count(config.threads, reps);
  for (std::size_t i = 0; i < nn; ++i) {
    const auto start = std::chrono::steady_clock::now();
    parallel_for(reps, workers, [&](std::size_t r) {
      res.log[i * reps + r] = run_replication(config, prepared, config.n_values[i], static_cast<int>(r));
    });
    t.seconds_per_n[i] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    for (std::size_t r = 0; r < reps; ++r) {
      const auto& rec = res.log[i * reps + r];
      if (rec.failed) {
        ++t.failures[i];
        continue;
      }
      for (std::size_t c = 0; c < config.criteria.size(); ++c) ++t.counts[c][i][static_cast<size_t>(rec.selected[c])];
    }
  }
  return res;
}

std::vector<std::string> check_invariants(const ExperimentResult& result) {
  std::vector<std::string> bad;
  const auto& t = result.table;
  for (std::size_t c = 0; c < t.criteria.size(); ++c) {
    for (std::size_t i = 0; i < t.n_values.size(); ++i) {
      int sum = t.failures[i];
      for (int v : t.counts[c][i]) sum += v;
      if (sum != t.replications) {
        bad.push_back(fmt::format("{} at n = {}: selections + failures = {} != {}", criterion_name(t.criteria[c]),
                                  t.n_values[i], sum, t.replications));
      }
    }
  }
  std::set<std::uint64_t> seeds;
  for (const auto& rec : result.log) {
    if (!seeds.insert(rec.seed).second) {
      bad.push_back(fmt::format("replication seed collision at n = {}, rep = {}", rec.n, rec.rep));
    }
  }
  return bad;
}

namespace {

std::string upper(const char* s) {
  std::string out(s);
  for (char& ch : out) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  return out;
}

}  // namespace

std::string table_render(const SelectionTable& t, TableFormat format) {
  std::string out;
  if (format == TableFormat::csv) {
    out = "criterion,n,model,count,replications,failures\n";
    for (std::size_t c = 0; c < t.criteria.size(); ++c) {
      for (std::size_t i = 0; i < t.n_values.size(); ++i) {
        for (std::size_t m = 0; m < t.model_ids.size(); ++m) {
          out += fmt::format("{},{},{},{},{},{}\n", criterion_name(t.criteria[c]), t.n_values[i], t.model_ids[m],
                             t.counts[c][i][m], t.replications, t.failures[i]);
        }
      }
    }
    return out;
  }

  std::size_t width = 8;
  for (const auto& id : t.model_ids) width = std::max(width, id.size() + 2);
  out += fmt::format("Number of replications selecting each model (replications = {})\n\n", t.replications);
  for (std::size_t i = 0; i < t.n_values.size(); ++i) {
    out += fmt::format("{:<12}{:<10}", fmt::format("n = {}", t.n_values[i]), "");
    for (const auto& id : t.model_ids) out += fmt::format("{:>{}}", id, width);
    out += fmt::format("{:>{}}\n", "failed", width);
    for (std::size_t c = 0; c < t.criteria.size(); ++c) {
      out += fmt::format("{:<12}{:<10}", "", upper(criterion_name(t.criteria[c])));
      for (int v : t.counts[c][i]) out += fmt::format("{:>{}}", v, width);
      out += fmt::format("{:>{}}\n", t.failures[i], width);
    }
    out += fmt::format("{:<22}{:.1f} s\n\n", "  wall time", t.seconds_per_n[i]);
  }
  return out;
}

std::string replications_csv(const ExperimentResult& result) {
  const auto& t = result.table;
  std::string out = "rep,n,model,h_at_hat,qbic1,qbic2,qaic,j_flag,converged,selected_by\n";
  for (const auto& rec : result.log) {
    for (std::size_t m = 0; m < rec.rows.size(); ++m) {
      std::string by;
      if (rec.failed) {
        by = "failed";
      } else {
        for (std::size_t c = 0; c < t.criteria.size(); ++c) {
          if (rec.selected[c] == static_cast<int>(m)) {
            if (!by.empty()) by.push_back(';');
            by += criterion_name(t.criteria[c]);
          }
        }
      }
      const auto& r = rec.rows[m];
      if (rec.fit_ok[m]) {
        out += fmt::format("{},{},{},{},{},{},{},{},{},{}\n", rec.rep, rec.n, r.model_id, r.h_at_hat, r.qbic1,
                           r.qbic2, r.qaic, r.j_flag ? 1 : 0, rec.converged[m] ? 1 : 0, by);
      } else {
        out += fmt::format("{},{},{},nan,nan,nan,nan,0,0,{}\n", rec.rep, rec.n, r.model_id, by);
      }
    }
  }
  return out;
}

GapProbe gap_growth_probe(const ExperimentConfig& config, const std::string& model_a, const std::string& model_b) {
  config.validate();
  auto find = [&](const std::string& id) -> const SemSpec& {
    for (const auto& m : config.models) {
      if (m.id() == id) return m;
    }
    throw ConfigError("gap_growth_probe: no model '" + id + "' in the config");
  };
  ExperimentConfig sub = config;
  sub.models = {find(model_a)};
  if (model_b != model_a) sub.models.push_back(find(model_b));
  sub.criteria = {Criterion::qbic1};
  const auto prepared = prepare_models(sub);
  const std::size_t ia = 0, ib = prepared.size() - 1;

  GapProbe g;
  g.model_a = model_a;
  g.model_b = model_b;
  g.n_values = config.n_values;
  g.analytic = 2.0 * (prepared[ia].h0_value - prepared[ib].h0_value);

  const ExperimentResult res = run_experiment(sub, prepared);
  const auto reps = static_cast<std::size_t>(config.replications);
  std::vector<double> pooled;
  for (std::size_t i = 0; i < config.n_values.size(); ++i) {
    const double n = static_cast<double>(config.n_values[i]);
    std::vector<double> gaps;
    for (std::size_t r = 0; r < reps; ++r) {
      const auto& rec = res.log[i * reps + r];
      if (rec.failed) continue;
      gaps.push_back((rec.rows[ib].qbic1 - rec.rows[ia].qbic1) / n);
    }
    double mean = 0.0, var = 0.0;
    for (double v : gaps) mean += v;
    if (!gaps.empty()) mean /= static_cast<double>(gaps.size());
    for (double v : gaps) var += (v - mean) * (v - mean);
    if (gaps.size() > 1) var /= static_cast<double>(gaps.size() - 1);
    g.mean_gap_per_n.push_back(mean);
    g.se_gap_per_n.push_back(gaps.size() > 1 ? std::sqrt(var / static_cast<double>(gaps.size())) : 0.0);
    g.used_per_n.push_back(static_cast<int>(gaps.size()));
    pooled.insert(pooled.end(), gaps.begin(), gaps.end());
  }
  if (pooled.empty()) throw AllStartsFailed("gap_growth_probe: every replication failed");
  double mean = 0.0, var = 0.0;
  for (double v : pooled) mean += v;
  mean /= static_cast<double>(pooled.size());
  for (double v : pooled) var += (v - mean) * (v - mean);
  if (pooled.size() > 1) var /= static_cast<double>(pooled.size() - 1);
  g.level = mean;
  g.level_se = std::sqrt(var / static_cast<double>(pooled.size()));

  if (g.n_values.size() > 1) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double k = static_cast<double>(g.n_values.size());
    for (std::size_t i = 0; i < g.n_values.size(); ++i) {
      const double x = std::log(static_cast<double>(g.n_values[i])), y = g.mean_gap_per_n[i];
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
    }
    const double den = k * sxx - sx * sx;
    g.slope = den != 0.0 ? (k * sxy - sx * sy) / den : 0.0;
  }
  g.relative_error = g.analytic != 0.0 ? std::abs(g.level - g.analytic) / std::abs(g.analytic) : std::abs(g.level);
  return g;
}

}  // namespace hfsem
