#pragma once

// Dense linear-algebra kernels shared by every other module.

#include <Eigen/Dense>
#include <optional>

namespace hfsem {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Real symmetric matrix with finite entries. Symmetry is exact: every
/// constructor either verifies it or mirrors one triangle onto the other.
class SymMatrix {
 public:
  SymMatrix() = default;
  explicit SymMatrix(Index order);

  /// Throws ShapeError unless `a` is square, finite and exactly symmetric.
  static SymMatrix from(const MatrixXd& a);
  /// Builds from the lower triangle of `a`, ignoring the strict upper part.
  static SymMatrix from_lower(const MatrixXd& a);
  static SymMatrix identity(Index order);

  Index order() const { return m_.rows(); }
  double operator()(Index i, Index j) const { return m_(i, j); }
  void set(Index i, Index j, double v);

  const MatrixXd& matrix() const { return m_; }
  operator const MatrixXd&() const { return m_; }

 private:
  MatrixXd m_;
};

struct DuplicationMatrix {
  Index order = 0;
  MatrixXd matrix;  // order^2 x order(order+1)/2, entries 0/1
};

struct CholLogdet {
  double logdet = 0.0;
  SymMatrix inverse;
};

inline Index vech_length(Index p) { return p * (p + 1) / 2; }

/// Column-stacked lower triangle: (1,1),(2,1),...,(p,1),(2,2),...
VectorXd vech(const SymMatrix& a);
/// Same ordering for a general square matrix; throws ShapeError otherwise.
VectorXd vech(const MatrixXd& a);
VectorXd vec(const MatrixXd& a);
/// Inverse of vech for symmetric matrices.
SymMatrix unvech(const VectorXd& v);

DuplicationMatrix duplication(Index p);

MatrixXd kron(const MatrixXd& a, const MatrixXd& b);

constexpr double kDefaultRankTol = 1e-8;

/// Moore-Penrose inverse via SVD; singular values at or below
/// rel_tol * sigma_max are treated as zero.
MatrixXd pinv(const MatrixXd& a, double rel_tol = kDefaultRankTol);

/// log det and inverse through Cholesky. Returns nullopt when `a` is not
/// numerically positive definite.
std::optional<CholLogdet> try_chol_logdet(const MatrixXd& a);
/// Throwing form of try_chol_logdet (NotPositiveDefinite).
CholLogdet chol_logdet(const SymMatrix& a);

Index numeric_rank(const MatrixXd& a, double rel_tol = kDefaultRankTol);

}  // namespace hfsem
