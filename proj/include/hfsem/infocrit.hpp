#pragma once

// Information criteria, the asymptotic information matrix and model
// selection.

#include <optional>
#include <string>
#include <vector>

#include "hfsem/qmle.hpp"

namespace hfsem {

enum class Criterion { qbic1, qbic2, qaic };

const char* criterion_name(Criterion c);
/// Accepts "qbic1", "qbic2", "qaic"; throws ConfigError otherwise.
Criterion parse_criterion(const std::string& name);

/// -2 H(theta_hat) + log det(n Gamma_tilde).
double qbic1(const FitReport& fit);
/// -2 H(theta_hat) + q log n.
double qbic2(const FitReport& fit);
/// -2 H(theta_hat) + 2 q.
double qaic(const FitReport& fit);

struct CriteriaRow {
  std::string model_id;
  double h_at_hat = 0.0;
  double qbic1 = 0.0;
  double qbic2 = 0.0;
  double qaic = 0.0;
  bool j_flag = false;
  Index q = 0;
  Index n = 0;
  double logdet_gamma_tilde = 0.0;

  double value(Criterion c) const;
};

CriteriaRow criteria_row(const FitReport& fit);

struct GammaZero {
  SymMatrix gamma0;  // q x q
  SymMatrix w0;      // p(p+1)/2 square
  MatrixXd delta0;   // p(p+1)/2 x q
};

/// Gamma_0 = Delta_0' W_0^-1 Delta_0 with W_0 = 2 D_p^+ (S0 x S0) D_p^+'.
/// Throws RankDeficient when rank(Delta_0) < q.
GammaZero gamma_zero(const SemSpec& spec, const VectorXd& theta0, const SymMatrix& sigma0);

/// Posterior model probabilities proportional to prior_m exp(-crit_m / 2).
/// Empty priors mean equal priors. Throws ConfigError on invalid priors.
std::vector<double> posterior_probs(const std::vector<CriteriaRow>& rows, Criterion criterion,
                                    const std::vector<double>& priors = {});

/// Index of the argmin of the criterion; ties go to smaller q, then to the
/// lexicographically smaller model id. Throws ConfigError on an empty list.
std::size_t select(const std::vector<CriteriaRow>& rows, Criterion criterion = Criterion::qbic2);

}  // namespace hfsem
