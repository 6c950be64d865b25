#include <cmath>
#include <random>

#include "doctest.h"
#include "gen.hpp"
#include "hfsem/diffsim.hpp"
#include "hfsem/errors.hpp"
#include "hfsem/infocrit.hpp"
#include "hfsem/models.hpp"

using namespace hfsem;

namespace {

FitReport synthetic(double h, Index q, Index n, bool j_flag, const MatrixXd& gamma_tilde = {}) {
  FitReport f;
  f.model_id = "m";
  f.h_at_hat = h;
  f.q = q;
  f.n = n;
  f.j_flag = j_flag;
  f.hessian_ok = j_flag;
  f.gamma_tilde = SymMatrix::from(gamma_tilde.size() ? gamma_tilde : MatrixXd::Identity(q, q));
  f.hessian = SymMatrix(q);
  f.theta_hat = VectorXd::Zero(q);
  return f;
}

CriteriaRow row(const std::string& id, Index q, double value) {
  CriteriaRow r;
  r.model_id = id;
  r.q = q;
  r.qbic1 = r.qbic2 = r.qaic = value;
  return r;
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

}  // namespace

TEST_SUITE("infocrit") {
  TEST_CASE("criteria arithmetic") {
    const FitReport a = synthetic(-1000.0, 22, 100, false);
    CHECK(qbic1(a) == doctest::Approx(2000.0 + 22.0 * std::log(100.0)).epsilon(1e-15));
    CHECK(qbic1(a) == doctest::Approx(2101.3137).epsilon(1e-7));
    CHECK(qbic1(a) == qbic2(a));
    CHECK(qaic(a) == 2044.0);
    const FitReport b = synthetic(-1000.0, 23, 100, false);
    CHECK(qbic2(b) == doctest::Approx(2105.9189).epsilon(1e-7));
  }

  TEST_CASE("QBIC1 adds log det of the information when J holds") {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 20; ++trial) {
      const Index q = gen::uniform_int(rng, 1, 8);
      const MatrixXd g = gen::pos_def(rng, q);
      const FitReport f = synthetic(gen::uniform(rng, -1e4, 1e4), q, 1000, true, g);
      Eigen::SelfAdjointEigenSolver<MatrixXd> es(g);
      const double logdet = es.eigenvalues().array().log().sum();
      const CriteriaRow r = criteria_row(f);
      CHECK(std::abs(r.qbic1 - r.qbic2 - logdet) < 1e-10 * (1.0 + std::abs(logdet)));
      CHECK(r.logdet_gamma_tilde == doctest::Approx(logdet).epsilon(1e-12));
    }
  }

  TEST_CASE("identity holds on a real fit") {
    const QuadVar qv = quad_var(simulate_true_model(1000, 1.0, 3, {OuScheme::exact, false}).x_obs, 1.0);
    const FitReport f = fit(LikelihoodSurface(model1(), qv), model1_theta0());
    REQUIRE(f.j_flag);
    const double direct = 2.0 * Eigen::LLT<MatrixXd>(f.gamma_tilde.matrix()).matrixLLT().diagonal().array().log().sum();
    CHECK(std::abs(qbic1(f) - qbic2(f) - direct) < 1e-10);
  }

  TEST_CASE("scalar information matrix") {
    const double s2 = 1.7;
    VectorXd t(1);
    t << s2;
    const GammaZero g = gamma_zero(scalar_model(), t, SymMatrix::from(MatrixXd::Constant(1, 1, s2)));
    CHECK(g.w0(0, 0) == doctest::Approx(2.0 * s2 * s2).epsilon(1e-14));
    CHECK(g.gamma0(0, 0) == doctest::Approx(1.0 / (2.0 * s2 * s2)).epsilon(1e-14));
    CHECK(g.delta0 == MatrixXd::Ones(1, 1));
  }

  TEST_CASE("information at the truth equals the trace form and is PD") {
    const SymMatrix s0 = true_model_4_6().sigma0();
    for (const auto& [spec, t0] : {std::pair{model1(), model1_theta0()}, std::pair{model2(), model2_theta0()}}) {
      const GammaZero g = gamma_zero(spec, t0, s0);
      const CovDerivatives cd = implied_cov_derivatives(spec, t0);
      const MatrixXd inv = s0.matrix().inverse();
      const Index q = spec.q();
      MatrixXd oracle(q, q);
      for (Index i = 0; i < q; ++i)
        for (Index j = 0; j < q; ++j)
          oracle(i, j) =
              0.5 * (inv * cd.d_sigma[static_cast<size_t>(i)] * inv * cd.d_sigma[static_cast<size_t>(j)]).trace();
      CHECK((g.gamma0.matrix() - oracle).norm() / oracle.norm() < 1e-8);
      Eigen::SelfAdjointEigenSolver<MatrixXd> es(g.gamma0.matrix());
      CHECK(es.eigenvalues().minCoeff() > 0.0);
      CHECK(g.delta0.rows() == 55);
    }
  }

  TEST_CASE("rank-deficient Jacobian is refused") {
    SemPatterns p;
    p.lambda_x1 = PatternMatrix(1, 1);
    p.lambda_x1.set_fixed(0, 0, 1.0);
    p.lambda_x2 = PatternMatrix(0, 0);
    p.b_mat = PatternMatrix(0, 0);
    p.gamma_mat = PatternMatrix(0, 1);
    p.sigma_xixi = PatternMatrix(1, 1);
    p.sigma_xixi.set_free(0, 0, 1, SignConstraint::positive);
    p.sigma_dd = PatternMatrix(1, 1);
    p.sigma_dd.set_free(0, 0, 0, SignConstraint::positive);
    p.sigma_ee = PatternMatrix(0, 0);
    p.sigma_zz = PatternMatrix(0, 0);
    const SemSpec spec("collinear", p);
    CHECK_THROWS_AS(gamma_zero(spec, VectorXd::Ones(2), SymMatrix::from(MatrixXd::Constant(1, 1, 2.0))),
                    RankDeficient);
  }

  TEST_CASE("posterior probabilities") {
    std::vector<CriteriaRow> rows{row("a", 1, 10.0), row("b", 2, 10.0)};
    auto p = posterior_probs(rows, Criterion::qbic2);
    CHECK(p[0] == doctest::Approx(0.5));
    CHECK(p[1] == doctest::Approx(0.5));
    rows[1].qbic2 = 10.0 + 2.0 * std::log(1e6);
    p = posterior_probs(rows, Criterion::qbic2);
    CHECK(p[0] / p[1] == doctest::Approx(1e6).epsilon(1e-9));

    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 50; ++trial) {
      const auto m = static_cast<std::size_t>(gen::uniform_int(rng, 1, 6));
      std::vector<CriteriaRow> rs;
      for (std::size_t i = 0; i < m; ++i) rs.push_back(row("m" + std::to_string(i), 1, gen::uniform(rng, -1e6, 1e6)));
      const auto a = posterior_probs(rs, Criterion::qaic);
      double sum = 0.0;
      for (double v : a) sum += v;
      CHECK(std::abs(sum - 1.0) < 1e-12);
      const double shift = gen::uniform(rng, -1e3, 1e3);
      for (auto& r : rs) r.qaic += shift;
      const auto b = posterior_probs(rs, Criterion::qaic);
      for (std::size_t i = 0; i < m; ++i) CHECK(std::abs(a[i] - b[i]) < 1e-9);
    }
  }

  TEST_CASE("posterior priors are validated and applied") {
    std::vector<CriteriaRow> rows{row("a", 1, 10.0), row("b", 2, 10.0)};
    const auto p = posterior_probs(rows, Criterion::qbic1, {0.25, 0.75});
    CHECK(p[1] == doctest::Approx(0.75));
    CHECK_THROWS_AS(posterior_probs(rows, Criterion::qbic1, {0.5}), ConfigError);
    CHECK_THROWS_AS(posterior_probs(rows, Criterion::qbic1, {0.0, 1.0}), ConfigError);
    CHECK_THROWS_AS(posterior_probs(rows, Criterion::qbic1, {0.6, 0.6}), ConfigError);
  }

  TEST_CASE("selection takes the argmin with ties to fewer parameters then id") {
    CHECK(select({row("only", 5, 1.0)}) == 0);
    CHECK(select({row("m2", 23, 1.0), row("m1", 22, 1.0)}) == 1);
    CHECK(select({row("b", 22, 1.0), row("a", 22, 1.0)}) == 1);
    CHECK(select({row("a", 22, 2.0), row("b", 23, 1.0)}) == 1);
    CHECK_THROWS_AS(select({}), ConfigError);
  }

  TEST_CASE("criterion names") {
    for (Criterion c : {Criterion::qbic1, Criterion::qbic2, Criterion::qaic}) CHECK(parse_criterion(criterion_name(c)) == c);
    CHECK_THROWS_AS(parse_criterion("bic"), ConfigError);
  }
}
