#include "hfsem/matkit.hpp"

#include <cmath>
#include <string>

#include "hfsem/errors.hpp"

namespace hfsem {

namespace {

void require_square(const MatrixXd& a, const char* what) {
  if (a.rows() != a.cols()) {
    throw ShapeError(std::string(what) + ": expected a square matrix, got " +
                     std::to_string(a.rows()) + "x" + std::to_string(a.cols()));
  }
}

}  // namespace

SymMatrix::SymMatrix(Index order) : m_(MatrixXd::Zero(order, order)) {}

SymMatrix SymMatrix::from(const MatrixXd& a) {
  require_square(a, "SymMatrix");
  if (!a.allFinite()) throw ShapeError("SymMatrix: non-finite entry");
  for (Index j = 0; j < a.cols(); ++j) {
    for (Index i = j + 1; i < a.rows(); ++i) {
      if (a(i, j) != a(j, i)) {
        throw ShapeError("SymMatrix: input is not symmetric at (" + std::to_string(i) + "," +
                         std::to_string(j) + ")");
      }
    }
  }
  SymMatrix s;
  s.m_ = a;
  return s;
}

SymMatrix SymMatrix::from_lower(const MatrixXd& a) {
  require_square(a, "SymMatrix");
  SymMatrix s;
  s.m_ = a.selfadjointView<Eigen::Lower>();
  if (!s.m_.allFinite()) throw ShapeError("SymMatrix: non-finite entry");
  return s;
}

SymMatrix SymMatrix::identity(Index order) {
  SymMatrix s;
  s.m_ = MatrixXd::Identity(order, order);
  return s;
}

void SymMatrix::set(Index i, Index j, double v) {
  m_(i, j) = v;
  m_(j, i) = v;
}

VectorXd vech(const SymMatrix& a) { return vech(a.matrix()); }

VectorXd vech(const MatrixXd& a) {
  require_square(a, "vech");
  const Index p = a.rows();
  VectorXd out(vech_length(p));
  Index k = 0;
  for (Index j = 0; j < p; ++j) {
    for (Index i = j; i < p; ++i) out(k++) = a(i, j);
  }
  return out;
}

VectorXd vec(const MatrixXd& a) { return a.reshaped(); }

SymMatrix unvech(const VectorXd& v) {
  // Solve p(p+1)/2 = len.
  const auto p = static_cast<Index>(std::llround((std::sqrt(8.0 * v.size() + 1.0) - 1.0) / 2.0));
  if (vech_length(p) != v.size()) throw ShapeError("unvech: length is not triangular");
  SymMatrix out(p);
  Index k = 0;
  for (Index j = 0; j < p; ++j) {
    for (Index i = j; i < p; ++i) out.set(i, j, v(k++));
  }
  return out;
}

DuplicationMatrix duplication(Index p) {
  if (p < 1) throw ShapeError("duplication: order must be >= 1");
  DuplicationMatrix d;
  d.order = p;
  d.matrix = MatrixXd::Zero(p * p, vech_length(p));
  Index k = 0;
  for (Index j = 0; j < p; ++j) {
    for (Index i = j; i < p; ++i, ++k) {
      d.matrix(j * p + i, k) = 1.0;
      d.matrix(i * p + j, k) = 1.0;
    }
  }
  return d;
}

MatrixXd kron(const MatrixXd& a, const MatrixXd& b) {
  MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

MatrixXd pinv(const MatrixXd& a, double rel_tol) {
  if (a.size() == 0) return MatrixXd::Zero(a.cols(), a.rows());
  Eigen::BDCSVD<MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const VectorXd& s = svd.singularValues();
  const double cutoff = rel_tol * (s.size() > 0 ? s(0) : 0.0);
  VectorXd s_inv = VectorXd::Zero(s.size());
  for (Index i = 0; i < s.size(); ++i) {
    if (s(i) > cutoff) s_inv(i) = 1.0 / s(i);
  }
  return svd.matrixV() * s_inv.asDiagonal() * svd.matrixU().transpose();
}

std::optional<CholLogdet> try_chol_logdet(const MatrixXd& a) {
  if (a.rows() != a.cols() || !a.allFinite()) return std::nullopt;
  Eigen::LLT<MatrixXd> llt(a);
  if (llt.info() != Eigen::Success) return std::nullopt;
  const VectorXd diag = llt.matrixLLT().diagonal();
  if ((diag.array() <= 0.0).any()) return std::nullopt;
  CholLogdet out;
  out.logdet = 2.0 * diag.array().log().sum();
  if (!std::isfinite(out.logdet)) return std::nullopt;
  out.inverse = SymMatrix::from_lower(llt.solve(MatrixXd::Identity(a.rows(), a.cols())));
  return out;
}

CholLogdet chol_logdet(const SymMatrix& a) {
  auto r = try_chol_logdet(a.matrix());
  if (!r) throw NotPositiveDefinite("chol_logdet: matrix is not positive definite");
  return std::move(*r);
}

Index numeric_rank(const MatrixXd& a, double rel_tol) {
  if (a.size() == 0) return 0;
  Eigen::BDCSVD<MatrixXd> svd(a);
  const VectorXd& s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0.0) return 0;
  const double cutoff = rel_tol * s(0);
  return (s.array() > cutoff).count();
}

}  // namespace hfsem
