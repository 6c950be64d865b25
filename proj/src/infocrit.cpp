#include "hfsem/infocrit.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hfsem/errors.hpp"

namespace hfsem {

const char* criterion_name(Criterion c) {
  switch (c) {
    case Criterion::qbic1: return "qbic1";
    case Criterion::qbic2: return "qbic2";
    case Criterion::qaic: return "qaic";
  }
  return "?";
}

Criterion parse_criterion(const std::string& name) {
  if (name == "qbic1") return Criterion::qbic1;
  if (name == "qbic2") return Criterion::qbic2;
  if (name == "qaic") return Criterion::qaic;
  throw ConfigError("unknown criterion '" + name + "' (expected qbic1, qbic2 or qaic)");
}

namespace {

double logdet_gamma_tilde(const FitReport& fit) {
  if (!fit.j_flag) return 0.0;
  // gamma_tilde is PD on J by construction of the gate.
  Eigen::LLT<MatrixXd> llt(fit.gamma_tilde.matrix());
  if (llt.info() != Eigen::Success) return 0.0;
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

}  // namespace

double qbic1(const FitReport& fit) {
  const double q = static_cast<double>(fit.q);
  return -2.0 * fit.h_at_hat + q * std::log(static_cast<double>(fit.n)) + logdet_gamma_tilde(fit);
}

double qbic2(const FitReport& fit) {
  return -2.0 * fit.h_at_hat + static_cast<double>(fit.q) * std::log(static_cast<double>(fit.n));
}

double qaic(const FitReport& fit) { return -2.0 * fit.h_at_hat + 2.0 * static_cast<double>(fit.q); }

double CriteriaRow::value(Criterion c) const {
  switch (c) {
    case Criterion::qbic1: return qbic1;
    case Criterion::qbic2: return qbic2;
    case Criterion::qaic: return qaic;
  }
  return qbic2;
}

CriteriaRow criteria_row(const FitReport& fit) {
  CriteriaRow r;
  r.model_id = fit.model_id;
  r.h_at_hat = fit.h_at_hat;
  r.qbic1 = qbic1(fit);
  r.qbic2 = qbic2(fit);
  r.qaic = qaic(fit);
  r.j_flag = fit.j_flag;
  r.q = fit.q;
  r.n = fit.n;
  r.logdet_gamma_tilde = logdet_gamma_tilde(fit);
  return r;
}

GammaZero gamma_zero(const SemSpec& spec, const VectorXd& theta0, const SymMatrix& sigma0) {
  GammaZero g;
  g.delta0 = jacobian_delta(spec, theta0);
  const Index rank = numeric_rank(g.delta0);
  if (rank < spec.q()) {
    throw RankDeficient("gamma_zero: rank(Delta) = " + std::to_string(rank) + " < q = " +
                        std::to_string(spec.q()));
  }
  const Index p = sigma0.order();
  const MatrixXd d_plus = pinv(duplication(p).matrix);
  g.w0 = SymMatrix::from_lower(2.0 * d_plus * kron(sigma0.matrix(), sigma0.matrix()) * d_plus.transpose());

  Eigen::LLT<MatrixXd> llt(g.w0.matrix());
  if (llt.info() != Eigen::Success) {
    MatrixXd jittered = g.w0.matrix();
    jittered.diagonal().array() += 1e-12 * g.w0.matrix().trace();
    llt.compute(jittered);
    if (llt.info() != Eigen::Success) throw NotPositiveDefinite("gamma_zero: W_0 is not positive definite");
  }
  const MatrixXd w_inv_delta = llt.solve(g.delta0);
  g.gamma0 = SymMatrix::from_lower(g.delta0.transpose() * w_inv_delta);
  return g;
}

std::vector<double> posterior_probs(const std::vector<CriteriaRow>& rows, Criterion criterion,
                                    const std::vector<double>& priors) {
  const std::size_t m = rows.size();
  if (m == 0) return {};
  std::vector<double> pr = priors;
  if (pr.empty()) pr.assign(m, 1.0 / static_cast<double>(m));
  if (pr.size() != m) throw ConfigError("posterior_probs: one prior per model required");
  double total = 0.0;
  for (double v : pr) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError("posterior_probs: priors must be positive");
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError("posterior_probs: priors must sum to 1");

  std::vector<double> logw(m);
  for (std::size_t i = 0; i < m; ++i) logw[i] = std::log(pr[i]) - 0.5 * rows[i].value(criterion);
  const double top = *std::max_element(logw.begin(), logw.end());
  std::vector<double> out(m);
  double sum = 0.0;
  for (std::size_t i = 0; i < m; ++i) sum += (out[i] = std::exp(logw[i] - top));
  for (double& v : out) v /= sum;
  return out;
}

std::size_t select(const std::vector<CriteriaRow>& rows, Criterion criterion) {
  if (rows.empty()) throw ConfigError("select: no candidate models");
  std::size_t best = 0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& a = rows[i];
    const auto& b = rows[best];
    const double va = a.value(criterion), vb = b.value(criterion);
    if (va < vb || (va == vb && (a.q < b.q || (a.q == b.q && a.model_id < b.model_id)))) best = i;
  }
  return best;
}

}  // namespace hfsem
