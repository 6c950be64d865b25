#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "gen.hpp"
#include "hfsem/diffsim.hpp"
#include "hfsem/errors.hpp"
#include "hfsem/models.hpp"
#include "hfsem/qlik.hpp"

using namespace hfsem;

namespace {

// Sum of Gaussian log densities of the increments with covariance h Sigma.
double increment_loglik(const MatrixXd& x, double T, const MatrixXd& sigma) {
  const Index n = x.rows() - 1, p = x.cols();
  const double h = T / static_cast<double>(n);
  const MatrixXd cov = h * sigma;
  const Eigen::LLT<MatrixXd> llt(cov);
  const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  double total = 0.0;
  for (Index i = 1; i <= n; ++i) {
    const VectorXd d = (x.row(i) - x.row(i - 1)).transpose();
    total += -0.5 * d.dot(llt.solve(d)) - 0.5 * logdet - 0.5 * static_cast<double>(p) * std::log(2.0 * std::numbers::pi);
  }
  return total;
}

const QuadVar& data_1000() {
  static const QuadVar qv = quad_var(simulate_true_model(1000, 1.0, 77, {OuScheme::exact, false}).x_obs, 1.0);
  return qv;
}

SemSpec scalar_model() {
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
  return SemSpec("scalar", p);
}

Eigen::RowVectorXd offset_row() { return Eigen::RowVectorXd::LinSpaced(10, 100.0, 1000.0); }

}  // namespace

TEST_SUITE("qlik") {
  TEST_CASE("quad_var equals the explicit sum of outer products") {
    std::mt19937_64 rng(1);
    const MatrixXd x = gen::normal_matrix(rng, 50, 4);
    const QuadVar qv = quad_var(x, 2.0);
    MatrixXd oracle = MatrixXd::Zero(4, 4);
    for (Index i = 1; i < 50; ++i) {
      const VectorXd d = (x.row(i) - x.row(i - 1)).transpose();
      oracle += d * d.transpose();
    }
    oracle /= 2.0;
    CHECK((qv.q_xx.matrix() - oracle).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(qv.n == 49);
    CHECK(qv.T == 2.0);
  }

  TEST_CASE("quad_var input errors") {
    CHECK_THROWS_AS(quad_var(MatrixXd::Zero(1, 3), 1.0), ShapeError);
    CHECK_THROWS_AS(quad_var(MatrixXd::Zero(5, 3), 0.0), ShapeError);
    MatrixXd x = MatrixXd::Zero(5, 3);
    x(2, 1) = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(quad_var(x, 1.0), ShapeError);
  }

  TEST_CASE("quasi-likelihood equals the increment log density up to the constant") {
    const MatrixXd x = simulate_true_model(300, 1.0, 5, {OuScheme::exact, false}).x_obs;
    const QuadVar qv = quad_var(x, 1.0);
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 5; ++trial) {
      const VectorXd theta = gen::perturb(rng, model1(), model1_theta0());
      const double h = h_n(LikelihoodSurface(model1(), qv), theta);
      const double oracle = increment_loglik(x, 1.0, implied_cov(model1(), theta).sigma().matrix());
      const double constant = -0.5 * 300.0 * 10.0 * std::log(2.0 * std::numbers::pi / 300.0);
      CHECK(h + constant == doctest::Approx(oracle).epsilon(1e-10));
    }
  }

  TEST_CASE("analytic gradient matches five-point differences") {
    std::mt19937_64 rng(4);
    for (const SemSpec& spec : {model1(), model2(), model3()}) {
      const VectorXd base = spec.reference_theta() ? *spec.reference_theta() : [&] {
        VectorXd t = model1_theta0().head(21);
        t.segment(3, 5) << 3, 2, 1, 2, 4;
        t(8) = 3;
        t(20) = 9;
        return t;
      }();
      const LikelihoodSurface s(spec, data_1000());
      for (int trial = 0; trial < 20; ++trial) {
        const VectorXd theta = gen::perturb(rng, spec, base);
        const VectorXd g = grad_h_n(s, theta);
        const VectorXd fd = gen::fd_gradient([&](const VectorXd& t) { return h_n(s, t); }, theta, 1e-4);
        CHECK((g - fd).cwiseAbs().maxCoeff() / (1.0 + g.cwiseAbs().maxCoeff()) < 1e-6);
      }
    }
  }

  TEST_CASE("gradient on random specs and random PD statistics") {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 30; ++trial) {
      const SemSpec spec = gen::random_spec(rng);
      const SymMatrix stat = SymMatrix::from_lower(gen::pos_def(rng, spec.p()));
      const LikelihoodSurface s(spec, stat, 250.0);
      const VectorXd theta = gen::perturb(rng, spec, *spec.reference_theta());
      const VectorXd g = grad_h_n(s, theta);
      const VectorXd fd = gen::fd_gradient([&](const VectorXd& t) { return h_n(s, t); }, theta, 1e-4);
      CHECK((g - fd).cwiseAbs().maxCoeff() / (1.0 + g.cwiseAbs().maxCoeff()) < 1e-6);
    }
  }

  TEST_CASE("Hessian is symmetric and equals -n times the information at an exact fit") {
    // With S = Sigma(theta0), the Hessian at theta0 is -w/2 tr(S^-1 dS_i S^-1 dS_j).
    const SemSpec spec = model1();
    const VectorXd t0 = model1_theta0();
    const CovDerivatives cd = implied_cov_derivatives(spec, t0);
    const MatrixXd inv = cd.sigma.matrix().inverse();
    const Index q = spec.q();
    MatrixXd info(q, q);
    for (Index i = 0; i < q; ++i)
      for (Index j = 0; j < q; ++j)
        info(i, j) = 0.5 * (inv * cd.d_sigma[static_cast<size_t>(i)] * inv * cd.d_sigma[static_cast<size_t>(j)]).trace();
    const double w = 1000.0;
    const LikelihoodSurface s(spec, cd.sigma, w);
    const HessianResult hr = hess_h_n_detail(s, t0);
    CHECK(hr.hessian.matrix() == hr.hessian.matrix().transpose());
    CHECK(hr.asymmetry < 1e-6);
    CHECK((hr.hessian.matrix() + w * info).norm() / (w * info.norm()) < 1e-6);
    CHECK(grad_h_n(s, t0).cwiseAbs().maxCoeff() < 1e-8 * w);
  }

  TEST_CASE("limit criterion peaks at the truth with value -p/2 - logdet/2") {
    const SymMatrix s0 = true_model_4_6().sigma0();
    const double logdet = chol_logdet(s0).logdet;
    CHECK(h_limit(model1(), model1_theta0(), s0) == doctest::Approx(-5.0 - 0.5 * logdet).epsilon(1e-12));
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 10; ++trial) {
      const VectorXd t = gen::perturb(rng, model1(), model1_theta0());
      CHECK(h_limit(model1(), t, s0) < h_limit(model1(), model1_theta0(), s0));
    }
    const LikelihoodSurface unit(model1(), s0, 1.0);
    CHECK(h_n(unit, model1_theta0()) == h_limit(model1(), model1_theta0(), s0));
  }

  TEST_CASE("nested models share the likelihood through the embedding") {
    const auto e = nested_embedding(model1(), model2());
    REQUIRE(e.has_value());
    const LikelihoodSurface s1(model1(), data_1000()), s2(model2(), data_1000());
    std::mt19937_64 rng(10);
    for (int trial = 0; trial < 20; ++trial) {
      const VectorXd t = gen::perturb(rng, model1(), model1_theta0());
      const double a = h_n(s1, t), b = h_n(s2, e->f * t + e->c);
      CHECK(std::abs(a - b) <= 1e-10 * std::abs(a));
    }
  }

  TEST_CASE("inadmissible points") {
    const LikelihoodSurface s(model1(), data_1000());
    VectorXd t = model1_theta0();
    t.segment(9, 13).setConstant(-1.0);
    CHECK_FALSE(s.try_value(t).has_value());
    CHECK_FALSE(s.try_value_grad(t).has_value());
    CHECK_THROWS_AS(h_n(s, t), NotPositiveDefinite);
    CHECK_THROWS_AS(grad_h_n(s, t), NotPositiveDefinite);
    CHECK_THROWS_AS(LikelihoodSurface(model1(), SymMatrix::identity(3), 1.0), ShapeError);
  }

  TEST_CASE("Hessian probe outside the PD region is reported with its location") {
    const LikelihoodSurface s(scalar_model(), SymMatrix::identity(1), 10.0);
    VectorXd t(1);
    t << 1e-8;
    try {
      hess_h_n(s, t);
      FAIL("expected a probe error");
    } catch (const HessianProbeError& e) {
      CHECK(e.probe()(0) < 0.0);
    }
  }

  TEST_CASE("scalar model closed forms") {
    const SemSpec spec = scalar_model();
    const double q0 = 2.0, n = 40.0;
    const LikelihoodSurface s(spec, SymMatrix::from(MatrixXd::Constant(1, 1, q0)), n);
    VectorXd t(1);
    t << 1.5;
    CHECK(grad_h_n(s, t)(0) == doctest::Approx(0.5 * n * (q0 / (1.5 * 1.5) - 1.0 / 1.5)).epsilon(1e-12));
    t << q0;
    CHECK(std::abs(grad_h_n(s, t)(0)) < 1e-12);
    CHECK(hess_h_n(s, t)(0, 0) == doctest::Approx(-0.5 * n / (q0 * q0)).epsilon(1e-7));
    CHECK(h_n(s, t) == doctest::Approx(-0.5 * n * (1.0 + std::log(q0))).epsilon(1e-14));
  }

  TEST_CASE("identity covariance gives minus half n times the trace") {
    std::mt19937_64 rng(6);
    SemPatterns p;
    p.lambda_x1 = PatternMatrix(3, 0);
    p.lambda_x2 = PatternMatrix(0, 0);
    p.b_mat = PatternMatrix(0, 0);
    p.gamma_mat = PatternMatrix(0, 0);
    p.sigma_xixi = PatternMatrix(0, 0);
    p.sigma_dd = PatternMatrix(3, 3);
    for (Index i = 0; i < 3; ++i) p.sigma_dd.set_free(i, i, static_cast<int>(i), SignConstraint::positive);
    p.sigma_ee = PatternMatrix(0, 0);
    p.sigma_zz = PatternMatrix(0, 0);
    const SemSpec spec("diag3", p);
    const QuadVar qv = quad_var(gen::normal_matrix(rng, 30, 3), 1.0);
    CHECK(h_n(LikelihoodSurface(spec, qv), VectorXd::Ones(3)) ==
          doctest::Approx(-0.5 * 29.0 * qv.q_xx.matrix().trace()).epsilon(1e-13));
  }

  TEST_CASE("small instances agree between the two formulas") {
    std::mt19937_64 rng(12);
    for (int trial = 0; trial < 20; ++trial) {
      SemSpec spec = gen::random_spec(rng);
      while (spec.p() > 4) spec = gen::random_spec(rng);
      const Index n = gen::uniform_int(rng, 2, 50);
      const MatrixXd x = gen::normal_matrix(rng, n + 1, spec.p());
      const double T = gen::uniform(rng, 0.5, 3.0);
      const VectorXd theta = gen::perturb(rng, spec, *spec.reference_theta());
      const double h = h_n(LikelihoodSurface(spec, quad_var(x, T)), theta);
      const double constant =
          -0.5 * static_cast<double>(n * spec.p()) * std::log(2.0 * std::numbers::pi * T / static_cast<double>(n));
      const double oracle = increment_loglik(x, T, implied_cov(spec, theta).sigma().matrix());
      CHECK(std::abs(h + constant - oracle) <= 1e-9 * std::abs(oracle));
    }
  }

  TEST_CASE("shifting the path by a constant leaves the likelihood unchanged; Q_XX is PSD") {
    const MatrixXd x = simulate_true_model(500, 1.0, 3, {OuScheme::exact, false}).x_obs;
    const MatrixXd shifted = x.rowwise() + offset_row();
    const QuadVar a = quad_var(x, 1.0), b = quad_var(shifted, 1.0);
    const double ha = h_n(LikelihoodSurface(model1(), a), model1_theta0());
    const double hb = h_n(LikelihoodSurface(model1(), b), model1_theta0());
    CHECK(std::abs(ha - hb) <= 1e-9 * std::abs(ha));
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(a.q_xx.matrix());
    CHECK(es.eigenvalues().minCoeff() >= -1e-10 * a.q_xx.matrix().trace());
    const QuadVar flat = quad_var(MatrixXd::Constant(10, 3, 4.0), 1.0);
    CHECK(flat.q_xx.matrix().isZero(0.0));
  }

  TEST_CASE("scaled quasi-likelihood approaches the limit criterion uniformly") {
    const QuadVar qv = quad_var(simulate_true_model(100000, 1.0, 8, {OuScheme::exact, false}).x_obs, 1.0);
    const SymMatrix s0 = true_model_4_6().sigma0();
    const LikelihoodSurface s(model1(), qv);
    std::mt19937_64 rng(1);
    double worst = 0.0;
    for (int k = 0; k < 20; ++k) {
      const VectorXd t = gen::perturb(rng, model1(), model1_theta0());
      const double limit = h_limit(model1(), t, s0);
      worst = std::max(worst, std::abs(h_n(s, t) / 1e5 - limit) / std::abs(limit));
    }
    CHECK(worst < 0.01);
  }
}
