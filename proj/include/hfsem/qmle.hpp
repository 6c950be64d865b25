#pragma once

// Quasi-maximum-likelihood estimation over the parameter box.

#include <cstdint>
#include <optional>
#include <string>

#include "hfsem/qlik.hpp"

namespace hfsem {

struct FitOptions {
  int max_iterations = 500;
  /// Stop when |projected grad|_inf < grad_tol * (1 + |H|).
  double grad_tol = 1e-6;
  /// Optimize log(theta_j) for variance parameters.
  bool log_variances = true;
  int max_backtracks = 60;
  /// Newton steps on the finite-difference Hessian after the quasi-Newton
  /// phase; each accepted step must raise H and shrink the gradient.
  int polish_steps = 8;
  double hessian_rel_step = 1e-5;
  /// J-gate: min eigenvalue of -H''/n must exceed this.
  double j_gate = 1e-10;
};

struct FitReport {
  std::string model_id;
  Index q = 0;
  Index n = 0;
  VectorXd theta_hat;
  double h_at_hat = 0.0;
  double grad_norm = 0.0;  // |projected grad|_inf at theta_hat
  SymMatrix hessian;       // zero matrix when hessian_ok is false
  bool hessian_ok = false;
  bool j_flag = false;
  SymMatrix gamma_tilde;  // -hessian/n on J, identity otherwise
  int iterations = 0;
  int restarts = 0;
  bool converged = false;
  bool boundary_hit = false;
};

/// BFGS ascent with Armijo backtracking along the projected path. `init`
/// must lie in the box. Throws AllStartsFailed when Sigma(init) is not PD.
FitReport fit(const LikelihoodSurface& surface, const VectorXd& init, const FitOptions& options = {});

/// Moment-style start: unique variances and latent variances from half the
/// matching diagonal of the statistic, loadings 1, Gamma 0.5, B 0.
VectorXd moment_start(const SemSpec& spec, const SymMatrix& statistic);

/// Best-H fit over starts: index 0 is `user_start` (or the moment start),
/// the rest are Latin-hypercube draws around the moment start. Ties go to
/// the lowest start index. Deterministic given seed.
FitReport fit_multistart(const LikelihoodSurface& surface, int starts, std::uint64_t seed,
                         const FitOptions& options = {},
                         const std::optional<VectorXd>& user_start = std::nullopt);

struct LimitOptimum {
  VectorXd theta_bar;
  double h0_value = 0.0;
  FitReport report;
};

/// Maximizes the limit criterion H_0 against Sigma_0; uses the spec's
/// reference theta as the first start when present.
LimitOptimum limit_optimum(const SemSpec& spec, const SymMatrix& sigma0, int starts = 8,
                           std::uint64_t seed = 7);

}  // namespace hfsem
