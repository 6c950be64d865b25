#pragma once

// Realized quadratic covariation and the Gaussian quasi-log-likelihood of
// the increments, with analytic gradient and finite-difference Hessian.

#include <optional>

#include "hfsem/matkit.hpp"
#include "hfsem/errors.hpp"
#include "hfsem/semspec.hpp"

namespace hfsem {

struct QuadVar {
  SymMatrix q_xx;
  Index n = 0;
  double T = 0.0;
};

/// (1/T) sum_i dX_i dX_i'. Throws ShapeError with fewer than two rows.
QuadVar quad_var(const MatrixXd& x_obs, double T);

struct ValueGrad {
  double value = 0.0;
  VectorXd grad;
};

/// theta -> weight * (-1/2 tr(Sigma(theta)^-1 S) - 1/2 log det Sigma(theta))
/// for a fixed PSD statistic S. With S = Q_XX and weight = n this is the
/// quasi-log-likelihood H_n; with S = Sigma_0 and weight = 1 it is the limit
/// criterion H_0. Immutable; safe to evaluate concurrently.
class LikelihoodSurface {
 public:
  LikelihoodSurface(SemSpec spec, const QuadVar& qv);
  LikelihoodSurface(SemSpec spec, SymMatrix statistic, double weight);

  const SemSpec& spec() const { return spec_; }
  const SymMatrix& statistic() const { return stat_; }
  double weight() const { return weight_; }

  /// nullopt when Sigma(theta) is not positive definite or Psi is singular.
  std::optional<double> try_value(const VectorXd& theta) const;
  std::optional<ValueGrad> try_value_grad(const VectorXd& theta) const;

 private:
  SemSpec spec_;
  SymMatrix stat_;
  double weight_;
};

/// Throws NotPositiveDefinite (or SingularPsi) outside the admissible region.
double h_n(const LikelihoodSurface& surface, const VectorXd& theta);
VectorXd grad_h_n(const LikelihoodSurface& surface, const VectorXd& theta);

/// Thrown when a Hessian probe point leaves the positive-definite region.
class HessianProbeError : public NotPositiveDefinite {
 public:
  HessianProbeError(const std::string& what, VectorXd probe)
      : NotPositiveDefinite(what), probe_(std::move(probe)) {}
  const VectorXd& probe() const { return probe_; }

 private:
  VectorXd probe_;
};

struct HessianResult {
  SymMatrix hessian;     // symmetrized (H + H') / 2
  double asymmetry = 0;  // |H - H'|_inf / (1 + |H|_inf) before symmetrization
};

/// Central differences of the analytic gradient with step
/// max(rel_step * (1 + |theta_j|), 1e-7).
HessianResult hess_h_n_detail(const LikelihoodSurface& surface, const VectorXd& theta,
                              double rel_step = 1e-5);
SymMatrix hess_h_n(const LikelihoodSurface& surface, const VectorXd& theta);

/// -1/2 tr(Sigma(theta)^-1 Sigma_0) - 1/2 log det Sigma(theta).
double h_limit(const SemSpec& spec, const VectorXd& theta, const SymMatrix& sigma0);

}  // namespace hfsem
