#include "hfsem/qmle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "hfsem/errors.hpp"

namespace hfsem {

namespace {

constexpr double kBoundaryEps = 1e-8;

/// Coordinates seen by the optimizer: log(theta) for variance parameters
/// when requested, theta otherwise.
class Transform {
 public:
  Transform(const SemSpec& spec, bool log_variances) : spec_(spec) {
    logged_.assign(static_cast<size_t>(spec.q()), false);
    if (log_variances) logged_ = spec.variance_mask();
    lower_ = to_u(spec.bounds().lower);
    upper_ = to_u(spec.bounds().upper);
  }

  VectorXd to_u(const VectorXd& theta) const {
    VectorXd u = theta;
    for (Index j = 0; j < u.size(); ++j)
      if (logged_[static_cast<size_t>(j)]) u(j) = std::log(theta(j));
    return u;
  }

  VectorXd to_theta(const VectorXd& u) const {
    VectorXd t = u;
    for (Index j = 0; j < u.size(); ++j)
      if (logged_[static_cast<size_t>(j)]) t(j) = std::exp(u(j));
    // Raw-scale box is authoritative.
    return spec_.project(t);
  }

  /// d theta / d u, elementwise.
  VectorXd jac(const VectorXd& theta) const {
    VectorXd d = VectorXd::Ones(theta.size());
    for (Index j = 0; j < theta.size(); ++j)
      if (logged_[static_cast<size_t>(j)]) d(j) = theta(j);
    return d;
  }

  VectorXd project(const VectorXd& u) const { return u.cwiseMax(lower_).cwiseMin(upper_); }
  const VectorXd& lower() const { return lower_; }
  const VectorXd& upper() const { return upper_; }

 private:
  const SemSpec& spec_;
  std::vector<bool> logged_;
  VectorXd lower_, upper_;
};

/// Gradient of H with components that push out of the box zeroed.
VectorXd projected_gradient(const SemSpec& spec, const VectorXd& theta, const VectorXd& grad) {
  VectorXd g = grad;
  const auto& b = spec.bounds();
  for (Index j = 0; j < g.size(); ++j) {
    const bool at_lower = theta(j) - b.lower(j) <= kBoundaryEps * (1.0 + std::abs(b.lower(j)));
    const bool at_upper = b.upper(j) - theta(j) <= kBoundaryEps * (1.0 + std::abs(b.upper(j)));
    if ((at_lower && g(j) < 0.0) || (at_upper && g(j) > 0.0)) g(j) = 0.0;
  }
  return g;
}

struct Point {
  VectorXd theta;
  double value;
  VectorXd grad;
};

std::optional<Point> evaluate(const LikelihoodSurface& s, const VectorXd& theta) {
  auto vg = s.try_value_grad(theta);
  if (!vg || !std::isfinite(vg->value) || !vg->grad.allFinite()) return std::nullopt;
  return Point{theta, vg->value, std::move(vg->grad)};
}

bool gradient_converged(const SemSpec& spec, const Point& pt, double tol) {
  return projected_gradient(spec, pt.theta, pt.grad).lpNorm<Eigen::Infinity>() <
         tol * (1.0 + std::abs(pt.value));
}

/// Quasi-Newton phase. Minimizes f(u) = -H(theta(u)).
Point bfgs(const LikelihoodSurface& surface, Point pt, const FitOptions& opt, int& iterations) {
  const SemSpec& spec = surface.spec();
  const Transform tr(spec, opt.log_variances);
  const Index q = spec.q();
  auto grad_u = [&](const Point& p) -> VectorXd { return -p.grad.cwiseProduct(tr.jac(p.theta)); };

  VectorXd u = tr.to_u(pt.theta);
  VectorXd g = grad_u(pt);
  MatrixXd h_inv = MatrixXd::Identity(q, q);
  bool scaled = false;
  bool fresh_metric = true;
  {
    const double gmax = g.lpNorm<Eigen::Infinity>();
    if (gmax > 0.0) h_inv *= std::min(1.0, 0.1 / gmax);
  }

  for (iterations = 0; iterations < opt.max_iterations; ++iterations) {
    if (gradient_converged(spec, pt, opt.grad_tol)) break;

    // Free set: coordinates not pinned at a bound by the descent direction.
    std::vector<bool> free(static_cast<size_t>(q), true);
    for (Index j = 0; j < q; ++j) {
      const bool at_lower = u(j) - tr.lower()(j) <= kBoundaryEps * (1.0 + std::abs(tr.lower()(j)));
      const bool at_upper = tr.upper()(j) - u(j) <= kBoundaryEps * (1.0 + std::abs(tr.upper()(j)));
      if ((at_lower && g(j) > 0.0) || (at_upper && g(j) < 0.0)) free[static_cast<size_t>(j)] = false;
    }
    auto direction = [&](const MatrixXd& hi) {
      VectorXd gf = g;
      for (Index j = 0; j < q; ++j)
        if (!free[static_cast<size_t>(j)]) gf(j) = 0.0;
      VectorXd d = -(hi * gf);
      for (Index j = 0; j < q; ++j)
        if (!free[static_cast<size_t>(j)]) d(j) = 0.0;
      return d;
    };
    VectorXd d = direction(h_inv);
    if (!(g.dot(d) < 0.0)) {
      h_inv = MatrixXd::Identity(q, q) * std::min(1.0, 0.1 / std::max(g.lpNorm<Eigen::Infinity>(), 1e-300));
      scaled = false;
      fresh_metric = true;
      d = direction(h_inv);
      if (!(g.dot(d) < 0.0)) break;
    }

    // Armijo backtracking along the projected path.
    const double f0 = -pt.value;
    double alpha = 1.0;
    std::optional<Point> next;
    VectorXd u_next;
    for (int bt = 0; bt < opt.max_backtracks; ++bt, alpha *= 0.5) {
      const VectorXd cand_u = tr.project(u + alpha * d);
      auto cand = evaluate(surface, tr.to_theta(cand_u));
      if (cand && -cand->value <= f0 + 1e-4 * g.dot(cand_u - u)) {
        next = std::move(cand);
        u_next = cand_u;
        break;
      }
    }
    if (!next) {
      if (fresh_metric) break;
      // Retry once from a steepest-descent metric.
      h_inv = MatrixXd::Identity(q, q) * std::min(1.0, 0.1 / std::max(g.lpNorm<Eigen::Infinity>(), 1e-300));
      scaled = false;
      fresh_metric = true;
      continue;
    }
    fresh_metric = false;

    const VectorXd g_next = grad_u(*next);
    const VectorXd s = u_next - u;
    const VectorXd y = g_next - g;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (!scaled) {
        h_inv = MatrixXd::Identity(q, q) * (sy / y.squaredNorm());
        scaled = true;
      }
      const double rho = 1.0 / sy;
      const VectorXd hy = h_inv * y;
      h_inv += (rho * rho * y.dot(hy) + rho) * (s * s.transpose()) - rho * (hy * s.transpose() + s * hy.transpose());
    }
    u = u_next;
    g = g_next;
    pt = std::move(*next);
  }
  return pt;
}

/// Newton refinement on the finite-difference Hessian.
Point polish(const LikelihoodSurface& surface, Point pt, const FitOptions& opt) {
  const SemSpec& spec = surface.spec();
  for (int it = 0; it < opt.polish_steps; ++it) {
    const VectorXd pg = projected_gradient(spec, pt.theta, pt.grad);
    const double gnorm = pg.lpNorm<Eigen::Infinity>();
    if (gnorm == 0.0) break;
    MatrixXd neg_h;
    try {
      neg_h = -hess_h_n_detail(surface, pt.theta, opt.hessian_rel_step).hessian.matrix();
    } catch (const HessianProbeError&) {
      break;
    }
    Eigen::LLT<MatrixXd> llt(neg_h);
    if (llt.info() != Eigen::Success) break;
    const VectorXd step = llt.solve(pt.grad);
    auto cand = evaluate(surface, spec.project(pt.theta + step));
    if (!cand) break;
    const double cand_gnorm = projected_gradient(spec, cand->theta, cand->grad).lpNorm<Eigen::Infinity>();
    if (cand->value < pt.value - 1e-12 * std::abs(pt.value) || !(cand_gnorm < gnorm)) break;
    pt = std::move(*cand);
    if (step.lpNorm<Eigen::Infinity>() <= 1e-14 * (1.0 + pt.theta.lpNorm<Eigen::Infinity>())) break;
  }
  return pt;
}

}  // namespace

FitReport fit(const LikelihoodSurface& surface, const VectorXd& init, const FitOptions& options) {
  const SemSpec& spec = surface.spec();
  if (init.size() != spec.q()) throw ShapeError("fit: init has wrong length");
  if (!spec.in_bounds(init)) throw ShapeError("fit: init lies outside the parameter box");
  auto start = evaluate(surface, init);
  if (!start) throw AllStartsFailed("fit: Sigma(init) is not positive definite");

  FitReport rep;
  rep.model_id = spec.id();
  rep.q = spec.q();
  rep.n = static_cast<Index>(std::llround(surface.weight()));
  rep.restarts = 1;

  Point pt = bfgs(surface, std::move(*start), options, rep.iterations);
  if (options.polish_steps > 0) pt = polish(surface, std::move(pt), options);

  rep.theta_hat = pt.theta;
  rep.h_at_hat = pt.value;
  rep.grad_norm = projected_gradient(spec, pt.theta, pt.grad).lpNorm<Eigen::Infinity>();
  rep.converged = rep.grad_norm < options.grad_tol * (1.0 + std::abs(pt.value));
  const auto& b = spec.bounds();
  for (Index j = 0; j < spec.q(); ++j) {
    if (pt.theta(j) - b.lower(j) < kBoundaryEps || b.upper(j) - pt.theta(j) < kBoundaryEps) {
      rep.boundary_hit = true;
    }
  }

  rep.gamma_tilde = SymMatrix::identity(spec.q());
  rep.hessian = SymMatrix(spec.q());
  try {
    rep.hessian = hess_h_n_detail(surface, pt.theta, options.hessian_rel_step).hessian;
    rep.hessian_ok = true;
  } catch (const HessianProbeError&) {
    rep.hessian_ok = false;
  }
  if (rep.hessian_ok && spec.q() > 0) {
    const MatrixXd scaled = -rep.hessian.matrix() / surface.weight();
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(scaled, Eigen::EigenvaluesOnly);
    if (eig.eigenvalues().minCoeff() > options.j_gate) {
      rep.j_flag = true;
      rep.gamma_tilde = SymMatrix::from_lower(scaled);
    }
  }
  return rep;
}

VectorXd moment_start(const SemSpec& spec, const SymMatrix& statistic) {
  const auto& pat = spec.patterns();
  const Index p1 = spec.p1();
  VectorXd theta = VectorXd::Zero(spec.q());
  auto half_diag = [&](Index i) { return 0.5 * std::max(statistic(i, i), 0.0); };
  // First observed row that loads on latent column k, for a variance scale.
  auto indicator_row = [](const PatternMatrix& lambda, Index k) -> Index {
    for (Index i = 0; i < lambda.rows(); ++i) {
      const Cell& c = lambda.at(i, k);
      if (std::holds_alternative<FreeCell>(c) || std::get<FixedCell>(c).value != 0.0) return i;
    }
    return 0;
  };
  for (Index j = 0; j < spec.q(); ++j) {
    const auto& ref = spec.cells_of(j).front();
    double v = 0.0;
    switch (ref.kind) {
      case PatternKind::lambda_x1:
      case PatternKind::lambda_x2: v = 1.0; break;
      case PatternKind::gamma_mat: v = 0.5; break;
      case PatternKind::b_mat: v = 0.0; break;
      case PatternKind::sigma_dd: v = ref.row == ref.col ? half_diag(ref.row) : 0.0; break;
      case PatternKind::sigma_ee: v = ref.row == ref.col ? half_diag(p1 + ref.row) : 0.0; break;
      case PatternKind::sigma_xixi:
        v = ref.row == ref.col ? half_diag(indicator_row(pat.lambda_x1, ref.row)) : 0.0;
        break;
      case PatternKind::sigma_zz:
        v = ref.row == ref.col ? half_diag(p1 + indicator_row(pat.lambda_x2, ref.row)) : 0.0;
        break;
    }
    theta(j) = v;
  }
  return spec.project(theta);
}

FitReport fit_multistart(const LikelihoodSurface& surface, int starts, std::uint64_t seed,
                         const FitOptions& options, const std::optional<VectorXd>& user_start) {
  if (starts < 1) throw ShapeError("fit_multistart: starts must be >= 1");
  const SemSpec& spec = surface.spec();
  const Index q = spec.q();
  const VectorXd center = moment_start(spec, surface.statistic());

  std::vector<VectorXd> points;
  points.push_back(user_start ? spec.project(*user_start) : center);
  const int extra = starts - 1;
  if (extra > 0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    MatrixXd lhs(extra, q);
    for (Index j = 0; j < q; ++j) {
      std::vector<int> perm(static_cast<size_t>(extra));
      std::iota(perm.begin(), perm.end(), 0);
      std::shuffle(perm.begin(), perm.end(), rng);
      for (int s = 0; s < extra; ++s) lhs(s, j) = (perm[static_cast<size_t>(s)] + unif(rng)) / extra;
    }
    for (int s = 0; s < extra; ++s) {
      VectorXd t(q);
      for (Index j = 0; j < q; ++j) {
        const double c = center(j), w = lhs(s, j);
        if (spec.variance_mask()[static_cast<size_t>(j)]) {
          t(j) = c * std::exp(std::log(10.0) * (2.0 * w - 1.0));
        } else {
          t(j) = c + (2.0 * w - 1.0) * 3.0 * (1.0 + std::abs(c));
        }
      }
      points.push_back(spec.project(t));
    }
  }

  std::optional<FitReport> best;
  int attempted = 0;
  for (const VectorXd& start : points) {
    ++attempted;
    try {
      FitReport r = fit(surface, start, options);
      if (!best || r.h_at_hat > best->h_at_hat) best = std::move(r);
    } catch (const AllStartsFailed&) {
    }
  }
  if (!best) throw AllStartsFailed("fit_multistart: every start is outside the positive-definite region");
  best->restarts = attempted;
  return *best;
}

LimitOptimum limit_optimum(const SemSpec& spec, const SymMatrix& sigma0, int starts, std::uint64_t seed) {
  if (!try_chol_logdet(sigma0.matrix())) throw NotPositiveDefinite("limit_optimum: Sigma_0 is not PD");
  const LikelihoodSurface surface(spec, sigma0, 1.0);
  FitOptions opt;
  opt.grad_tol = 1e-10;
  opt.max_iterations = 2000;
  opt.polish_steps = 20;
  LimitOptimum out;
  out.report = fit_multistart(surface, starts, seed, opt, spec.reference_theta());
  out.theta_bar = out.report.theta_hat;
  out.h0_value = out.report.h_at_hat;
  return out;
}

}  // namespace hfsem
