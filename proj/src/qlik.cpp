#include "hfsem/qlik.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "hfsem/errors.hpp"

namespace hfsem {

QuadVar quad_var(const MatrixXd& x_obs, double T) {
  if (x_obs.rows() < 2) throw ShapeError("quad_var: need at least two observations");
  if (!(T > 0.0)) throw ShapeError("quad_var: T must be positive");
  if (!x_obs.allFinite()) throw ShapeError("quad_var: non-finite sample");
  const MatrixXd dx = x_obs.bottomRows(x_obs.rows() - 1) - x_obs.topRows(x_obs.rows() - 1);
  MatrixXd q = MatrixXd::Zero(x_obs.cols(), x_obs.cols());
  q.selfadjointView<Eigen::Lower>().rankUpdate(dx.transpose(), 1.0 / T);
  return {SymMatrix::from_lower(q), x_obs.rows() - 1, T};
}

LikelihoodSurface::LikelihoodSurface(SemSpec spec, const QuadVar& qv)
    : LikelihoodSurface(std::move(spec), qv.q_xx, static_cast<double>(qv.n)) {}

LikelihoodSurface::LikelihoodSurface(SemSpec spec, SymMatrix statistic, double weight)
    : spec_(std::move(spec)), stat_(std::move(statistic)), weight_(weight) {
  if (stat_.order() != spec_.p()) {
    throw ShapeError("LikelihoodSurface: statistic is " + std::to_string(stat_.order()) +
                     "x" + std::to_string(stat_.order()) + " but the model has p = " +
                     std::to_string(spec_.p()));
  }
}

std::optional<double> LikelihoodSurface::try_value(const VectorXd& theta) const {
  try {
    const ImpliedCov ic = implied_cov(spec_, theta);
    const auto chol = try_chol_logdet(ic.sigma().matrix());
    if (!chol) return std::nullopt;
    const double tr = chol->inverse.matrix().cwiseProduct(stat_.matrix()).sum();
    return weight_ * (-0.5 * tr - 0.5 * chol->logdet);
  } catch (const SingularPsi&) {
    return std::nullopt;
  }
}

std::optional<ValueGrad> LikelihoodSurface::try_value_grad(const VectorXd& theta) const {
  try {
    const CovDerivatives cd = implied_cov_derivatives(spec_, theta);
    const auto chol = try_chol_logdet(cd.sigma.matrix());
    if (!chol) return std::nullopt;
    const MatrixXd& inv = chol->inverse.matrix();
    const double tr = inv.cwiseProduct(stat_.matrix()).sum();
    // dH/dtheta_j = (w/2) tr[(S^-1 Q S^-1 - S^-1) dS_j]
    const MatrixXd kernel = inv * stat_.matrix() * inv - inv;
    ValueGrad out;
    out.value = weight_ * (-0.5 * tr - 0.5 * chol->logdet);
    out.grad.resize(spec_.q());
    for (Index j = 0; j < spec_.q(); ++j) {
      out.grad(j) = 0.5 * weight_ * kernel.cwiseProduct(cd.d_sigma[static_cast<size_t>(j)]).sum();
    }
    return out;
  } catch (const SingularPsi&) {
    return std::nullopt;
  }
}

double h_n(const LikelihoodSurface& surface, const VectorXd& theta) {
  implied_cov(surface.spec(), theta);  // surfaces SingularPsi and shape errors
  const auto v = surface.try_value(theta);
  if (!v) throw NotPositiveDefinite("Sigma(theta) is not positive definite");
  return *v;
}

VectorXd grad_h_n(const LikelihoodSurface& surface, const VectorXd& theta) {
  implied_cov(surface.spec(), theta);
  auto vg = surface.try_value_grad(theta);
  if (!vg) throw NotPositiveDefinite("Sigma(theta) is not positive definite");
  return std::move(vg->grad);
}

HessianResult hess_h_n_detail(const LikelihoodSurface& surface, const VectorXd& theta,
                              double rel_step) {
  const Index q = surface.spec().q();
  MatrixXd h(q, q);
  for (Index j = 0; j < q; ++j) {
    const double step = std::max(rel_step * (1.0 + std::abs(theta(j))), 1e-7);
    VectorXd plus = theta, minus = theta;
    plus(j) += step;
    minus(j) -= step;
    const auto gp = surface.try_value_grad(plus);
    if (!gp) throw HessianProbeError("Hessian probe left the admissible region", plus);
    const auto gm = surface.try_value_grad(minus);
    if (!gm) throw HessianProbeError("Hessian probe left the admissible region", minus);
    h.col(j) = (gp->grad - gm->grad) / (2.0 * step);
  }
  HessianResult r;
  const double scale = 1.0 + h.cwiseAbs().maxCoeff();
  r.asymmetry = (h - h.transpose()).cwiseAbs().maxCoeff() / scale;
  r.hessian = SymMatrix::from_lower(0.5 * (h + h.transpose()));
  return r;
}

SymMatrix hess_h_n(const LikelihoodSurface& surface, const VectorXd& theta) {
  return hess_h_n_detail(surface, theta).hessian;
}

double h_limit(const SemSpec& spec, const VectorXd& theta, const SymMatrix& sigma0) {
  const ImpliedCov ic = implied_cov(spec, theta);
  if (!try_chol_logdet(sigma0.matrix())) throw NotPositiveDefinite("h_limit: Sigma_0 is not positive definite");
  const CholLogdet c = chol_logdet(ic.sigma());
  return -0.5 * c.inverse.matrix().cwiseProduct(sigma0.matrix()).sum() - 0.5 * c.logdet;
}

}  // namespace hfsem
