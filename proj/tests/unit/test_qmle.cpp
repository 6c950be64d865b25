#include <random>

#include "doctest.h"
#include "gen.hpp"
#include "hfsem/diffsim.hpp"
#include "hfsem/errors.hpp"
#include "hfsem/models.hpp"
#include "hfsem/qmle.hpp"

using namespace hfsem;

namespace {

SemSpec scalar_model(std::optional<Bounds> bounds = std::nullopt) {
  SemPatterns p;
  p.lambda_x1 = PatternMatrix(1, 0);
  p.lambda_x2 = PatternMatrix(0, 0);
  p.b_mat = PatternMatrix(0, 0);
  p.gamma_mat = PatternMatrix(0, 0);
  p.sigma_xixi = PatternMatrix(0, 0);
  p.sigma_dd = PatternMatrix(1, 1);
  p.sigma_dd.set_free(0, 0, 0, SignConstraint::positive);
  p.sigma_ee = PatternMatrix(0, 0);
  p.sigma_zz = PatternMatrix(0, 0);
  return SemSpec("scalar", p, std::move(bounds));
}

QuadVar sample(Index n, std::uint64_t seed) {
  return quad_var(simulate_true_model(n, 1.0, seed, {OuScheme::exact, false}).x_obs, 1.0);
}

void check_report_invariants(const FitReport& r) {
  CHECK(r.theta_hat.size() == r.q);
  CHECK(r.hessian.order() == r.q);
  if (r.hessian_ok) {
    const MatrixXd info = -r.hessian.matrix() / static_cast<double>(r.n);
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(info);
    CHECK(r.j_flag == (es.eigenvalues().minCoeff() > 1e-10));
    if (r.j_flag) CHECK(r.gamma_tilde.matrix() == info);
  } else {
    CHECK_FALSE(r.j_flag);
  }
  if (!r.j_flag) CHECK(r.gamma_tilde.matrix() == MatrixXd::Identity(r.q, r.q));
}

}  // namespace

TEST_SUITE("qmle") {
  TEST_CASE("scalar model recovers the sample variance") {
    const double q0 = 3.7;
    const LikelihoodSurface s(scalar_model(), SymMatrix::from(MatrixXd::Constant(1, 1, q0)), 100.0);
    const FitReport r = fit(s, VectorXd::Constant(1, 1.0));
    CHECK(std::abs(r.theta_hat(0) - q0) < 1e-8);
    CHECK(r.converged);
    CHECK(r.j_flag);
    CHECK_FALSE(r.boundary_hit);
    check_report_invariants(r);
  }

  TEST_CASE("optimum on the boundary fails the J-gate and falls back to identity") {
    const Bounds b{VectorXd::Constant(1, 5.0), VectorXd::Constant(1, 10.0)};
    const LikelihoodSurface s(scalar_model(b), SymMatrix::from(MatrixXd::Constant(1, 1, 1.0)), 50.0);
    const FitReport r = fit(s, VectorXd::Constant(1, 7.0));
    CHECK(r.theta_hat(0) == 5.0);
    CHECK(r.boundary_hit);
    CHECK_FALSE(r.j_flag);
    CHECK(r.gamma_tilde.matrix() == MatrixXd::Identity(1, 1));
    check_report_invariants(r);
  }

  TEST_CASE("Model 1 from the truth: converged, improved, information PD") {
    const QuadVar qv = sample(1000, 21);
    const LikelihoodSurface s(model1(), qv);
    const FitReport r = fit(s, model1_theta0());
    CHECK(r.converged);
    CHECK(r.grad_norm < 1e-6 * (1.0 + std::abs(r.h_at_hat)));
    CHECK(r.h_at_hat >= h_n(s, model1_theta0()));
    CHECK(r.h_at_hat == h_n(s, r.theta_hat));
    CHECK(r.j_flag);
    CHECK_FALSE(r.boundary_hit);
    CHECK(r.model_id == "model1");
    CHECK(r.q == 22);
    CHECK(r.n == 1000);
    check_report_invariants(r);
  }

  TEST_CASE("log-variance and raw-scale optimization agree") {
    for (Index n : {1000, 10000}) {
      const LikelihoodSurface s(model1(), sample(n, 100 + static_cast<std::uint64_t>(n)));
      FitOptions raw;
      raw.log_variances = false;
      const FitReport a = fit(s, model1_theta0());
      const FitReport b = fit(s, model1_theta0(), raw);
      CHECK((a.theta_hat - b.theta_hat).cwiseAbs().maxCoeff() < 1e-6);
    }
  }

  TEST_CASE("deterministic reports") {
    const LikelihoodSurface s(model2(), sample(1000, 5));
    const FitReport a = fit(s, model2_theta0());
    const FitReport b = fit(s, model2_theta0());
    CHECK(a.theta_hat == b.theta_hat);
    CHECK(a.h_at_hat == b.h_at_hat);
    CHECK(a.hessian.matrix() == b.hessian.matrix());
    CHECK(a.iterations == b.iterations);
    const FitReport m1 = fit_multistart(s, 4, 9);
    const FitReport m2 = fit_multistart(s, 4, 9);
    CHECK(m1.theta_hat == m2.theta_hat);
  }

  TEST_CASE("single-start multistart with a user start is plain fit") {
    const LikelihoodSurface s(model1(), sample(1000, 6));
    const FitReport a = fit(s, model1_theta0());
    const FitReport b = fit_multistart(s, 1, 123, {}, model1_theta0());
    CHECK(a.theta_hat == b.theta_hat);
    CHECK(a.h_at_hat == b.h_at_hat);
    CHECK(b.restarts == 1);
  }

  TEST_CASE("multistart without the truth finds the true-start optimum") {
    int agree = 0;
    const int reps = 6;
    for (int r = 0; r < reps; ++r) {
      const LikelihoodSurface s(model1(), sample(1000, 500 + static_cast<std::uint64_t>(r)));
      const FitReport truth_start = fit(s, model1_theta0());
      const FitReport multi = fit_multistart(s, 8, 77 + static_cast<std::uint64_t>(r));
      check_report_invariants(multi);
      // a variance pinned at its floor leaves a flat direction, so compare H there
      const double tol = truth_start.boundary_hit ? 1e-3 : 1e-4;
      if (std::abs(truth_start.h_at_hat - multi.h_at_hat) <= 1e-9 * std::abs(truth_start.h_at_hat) &&
          (truth_start.theta_hat - multi.theta_hat).cwiseAbs().maxCoeff() < tol)
        ++agree;
    }
    CHECK(agree == reps);
  }

  TEST_CASE("moment start lies in the box and uses the diagonal of the statistic") {
    const QuadVar qv = sample(1000, 1);
    const VectorXd m = moment_start(model1(), qv.q_xx);
    CHECK(model1().in_bounds(m));
    CHECK(m(0) == 1.0);
    CHECK(m(7) == 0.5);
    CHECK(m(10) == doctest::Approx(0.5 * qv.q_xx(0, 0)));
  }

  TEST_CASE("degenerate statistic does not crash") {
    // two observations of a ten-dimensional process: Q_XX has rank one
    const MatrixXd x = simulate_true_model(1, 1.0, 3, {OuScheme::exact, false}).x_obs;
    const LikelihoodSurface s(model1(), quad_var(x, 1.0));
    try {
      const FitReport r = fit_multistart(s, 3, 1);
      CHECK((r.boundary_hit || !r.converged || !r.j_flag));
    } catch (const AllStartsFailed&) {
      CHECK(true);
    }
  }

  TEST_CASE("start errors") {
    const LikelihoodSurface s(model1(), sample(200, 2));
    VectorXd t = model1_theta0();
    t(9) = -1.0;
    CHECK_THROWS_AS(fit(s, t), ShapeError);
    CHECK_THROWS_AS(fit(s, VectorXd::Ones(5)), ShapeError);
    CHECK_THROWS_AS(fit_multistart(s, 0, 1), ShapeError);
  }

  TEST_CASE("limit optimum recovers the true parameters of the correct models") {
    const SymMatrix s0 = true_model_4_6().sigma0();
    const LimitOptimum l1 = limit_optimum(model1(), s0);
    CHECK((l1.theta_bar - model1_theta0()).cwiseAbs().maxCoeff() < 1e-5);
    const LimitOptimum l2 = limit_optimum(model2(), s0);
    CHECK((l2.theta_bar - model2_theta0()).cwiseAbs().maxCoeff() < 1e-5);
    CHECK(std::abs(l2.theta_bar(5)) < 1e-5);
    const LimitOptimum l3 = limit_optimum(model3(), s0);
    CHECK(l1.h0_value - l3.h0_value > 1e-6);
    CHECK_FALSE(l3.report.boundary_hit);
    CHECK(l1.h0_value == doctest::Approx(h_limit(model1(), model1_theta0(), s0)).epsilon(1e-12));
  }

  TEST_CASE("misspecified fit settles near the pseudo-true value") {
    const SymMatrix s0 = true_model_4_6().sigma0();
    const LimitOptimum l3 = limit_optimum(model3(), s0);
    for (std::uint64_t seed : {1u, 2u}) {
      const FitReport r = fit(LikelihoodSurface(model3(), sample(100000, seed)), l3.theta_bar);
      CHECK(r.converged);
      const VectorXd rel = (r.theta_hat - l3.theta_bar).cwiseQuotient(l3.theta_bar.cwiseAbs() + VectorXd::Ones(21));
      CHECK(rel.cwiseAbs().maxCoeff() < 0.25);
    }
  }
}
