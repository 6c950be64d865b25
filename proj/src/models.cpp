#include "hfsem/models.hpp"

namespace hfsem {

namespace {

constexpr auto kNonzero = SignConstraint::nonzero;
constexpr auto kPositive = SignConstraint::positive;

PatternMatrix diag_pattern(Index dim, int first_index) {
  PatternMatrix m(dim, dim);
  for (Index i = 0; i < dim; ++i) m.set_free(i, i, first_index + static_cast<int>(i), kPositive);
  return m;
}

// Shared x1 side: x1 = (1, t0, t1, t2)' xi, one exogenous variance, four
// unique variances starting at `delta_first`.
void fill_exogenous(SemPatterns& p, int xi_index, int delta_first) {
  p.lambda_x1 = PatternMatrix(4, 1);
  p.lambda_x1.set_fixed(0, 0, 1.0).set_free(1, 0, 0, kNonzero).set_free(2, 0, 1, kNonzero).set_free(3, 0, 2, kNonzero);
  p.sigma_xixi = PatternMatrix(1, 1);
  p.sigma_xixi.set_free(0, 0, xi_index, kPositive);
  p.sigma_dd = diag_pattern(4, delta_first);
}

SemSpec two_factor(const std::string& id, bool cross_loading) {
  SemPatterns p;
  const int shift = cross_loading ? 1 : 0;
  p.lambda_x2 = PatternMatrix(6, 2);
  p.lambda_x2.set_fixed(0, 0, 1.0).set_free(1, 0, 3, kNonzero).set_free(2, 0, 4, kNonzero);
  if (cross_loading) p.lambda_x2.set_free(2, 1, 5);
  p.lambda_x2.set_fixed(3, 1, 1.0).set_free(4, 1, 5 + shift, kNonzero).set_free(5, 1, 6 + shift, kNonzero);
  p.gamma_mat = PatternMatrix(2, 1);
  p.gamma_mat.set_free(0, 0, 7 + shift, kNonzero).set_free(1, 0, 8 + shift, kNonzero);
  p.b_mat = PatternMatrix(2, 2);
  fill_exogenous(p, 9 + shift, 10 + shift);
  p.sigma_ee = diag_pattern(6, 14 + shift);
  p.sigma_zz = diag_pattern(2, 20 + shift);
  return SemSpec(id, std::move(p), std::nullopt,
                 cross_loading ? model2_theta0() : model1_theta0());
}

}  // namespace

VectorXd model1_theta0() {
  VectorXd t(22);
  t << 3, 4, 6, 3, 2, 2, 4, 3, 2, 9, 4, 1, 4, 9, 25, 1, 4, 1, 9, 4, 9, 1;
  return t;
}

VectorXd model2_theta0() {
  VectorXd t(23);
  t << 3, 4, 6, 3, 2, 0, 2, 4, 3, 2, 9, 4, 1, 4, 9, 25, 1, 4, 1, 9, 4, 9, 1;
  return t;
}

SemSpec model1() { return two_factor("model1", false); }
SemSpec model2() { return two_factor("model2", true); }

SemSpec model3() {
  SemPatterns p;
  p.lambda_x2 = PatternMatrix(6, 1);
  p.lambda_x2.set_fixed(0, 0, 1.0);
  for (Index i = 1; i < 6; ++i) p.lambda_x2.set_free(i, 0, 2 + static_cast<int>(i), kNonzero);
  p.gamma_mat = PatternMatrix(1, 1);
  p.gamma_mat.set_free(0, 0, 8, kNonzero);
  p.b_mat = PatternMatrix(1, 1);
  fill_exogenous(p, 9, 10);
  p.sigma_ee = diag_pattern(6, 14);
  p.sigma_zz = diag_pattern(1, 20);
  return SemSpec("model3", std::move(p));
}

}  // namespace hfsem
