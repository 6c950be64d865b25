#pragma once

// Candidate-model specification: free/fixed patterns, parameter packing,
// the implied covariance of the observed increments and its Jacobian.

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "hfsem/matkit.hpp"

namespace hfsem {

enum class SignConstraint { none, nonzero, positive };

struct FixedCell {
  double value = 0.0;
};

struct FreeCell {
  int index = 0;  // zero-based position in theta
  SignConstraint constraint = SignConstraint::none;
};

using Cell = std::variant<FixedCell, FreeCell>;

class PatternMatrix {
 public:
  PatternMatrix() = default;
  /// All cells Fixed(0).
  PatternMatrix(Index rows, Index cols);
  static PatternMatrix fixed(const MatrixXd& values);

  PatternMatrix& set_fixed(Index i, Index j, double v);
  PatternMatrix& set_free(Index i, Index j, int index,
                          SignConstraint constraint = SignConstraint::none);

  Index rows() const { return rows_; }
  Index cols() const { return cols_; }
  const Cell& at(Index i, Index j) const { return cells_[static_cast<size_t>(i * cols_ + j)]; }

  /// Concrete matrix at theta.
  MatrixXd fill(const VectorXd& theta) const;

  friend bool operator==(const PatternMatrix& a, const PatternMatrix& b);

 private:
  Index rows_ = 0;
  Index cols_ = 0;
  std::vector<Cell> cells_;  // row-major
};

bool operator==(const FixedCell& a, const FixedCell& b);
bool operator==(const FreeCell& a, const FreeCell& b);

/// Which pattern matrix of a SemSpec a cell belongs to.
enum class PatternKind { lambda_x1, lambda_x2, b_mat, gamma_mat, sigma_xixi, sigma_dd, sigma_ee, sigma_zz };
inline constexpr int kPatternCount = 8;
const char* pattern_name(PatternKind kind);

struct Bounds {
  VectorXd lower;
  VectorXd upper;
};

struct SemPatterns {
  PatternMatrix lambda_x1;   // p1 x k1
  PatternMatrix lambda_x2;   // p2 x k2
  PatternMatrix b_mat;       // k2 x k2, zero diagonal
  PatternMatrix gamma_mat;   // k2 x k1
  PatternMatrix sigma_xixi;  // k1 x k1
  PatternMatrix sigma_dd;    // p1 x p1
  PatternMatrix sigma_ee;    // p2 x p2
  PatternMatrix sigma_zz;    // k2 x k2

  const PatternMatrix& get(PatternKind kind) const;
};

/// Concrete values of every model matrix.
struct ModelMatrices {
  MatrixXd lambda_x1, lambda_x2, b_mat, gamma_mat, sigma_xixi, sigma_dd, sigma_ee, sigma_zz;
};

inline constexpr double kVarianceLower = 1e-6;
inline constexpr double kVarianceUpper = 1e4;
inline constexpr double kLoadingBound = 1e3;

/// An immutable candidate model. Validates dimensions, index uniqueness and
/// bounds at construction; throws ShapeError on violations.
class SemSpec {
 public:
  SemSpec(std::string id, SemPatterns patterns, std::optional<Bounds> bounds = std::nullopt,
          std::optional<VectorXd> reference_theta = std::nullopt);

  const std::string& id() const { return id_; }
  const SemPatterns& patterns() const { return patterns_; }
  Index p1() const { return patterns_.lambda_x1.rows(); }
  Index p2() const { return patterns_.lambda_x2.rows(); }
  Index k1() const { return patterns_.lambda_x1.cols(); }
  Index k2() const { return patterns_.lambda_x2.cols(); }
  Index p() const { return p1() + p2(); }
  Index q() const { return q_; }
  const Bounds& bounds() const { return bounds_; }

  /// Parameters that sit on the diagonal of a latent covariance pattern.
  const std::vector<bool>& variance_mask() const { return variance_mask_; }
  SignConstraint constraint(Index j) const { return constraints_[static_cast<size_t>(j)]; }

  /// Optional known parameter value shipped with the spec (true or
  /// pseudo-true); used as a start and for identifiability checks.
  const std::optional<VectorXd>& reference_theta() const { return reference_theta_; }

  /// Default box: variances in [1e-6, 1e4], everything else in [-1e3, 1e3].
  Bounds default_bounds() const;
  bool in_bounds(const VectorXd& theta) const;
  VectorXd project(const VectorXd& theta) const;

  /// Every (pattern, row, col) cell carrying parameter j.
  struct CellRef {
    PatternKind kind;
    Index row;
    Index col;
  };
  const std::vector<CellRef>& cells_of(Index j) const { return cells_of_[static_cast<size_t>(j)]; }

 private:
  std::string id_;
  SemPatterns patterns_;
  Index q_ = 0;
  Bounds bounds_;
  std::vector<bool> variance_mask_;
  std::vector<SignConstraint> constraints_;
  std::vector<std::vector<CellRef>> cells_of_;
  std::optional<VectorXd> reference_theta_;
};

/// Reads the Free cells of `values` into theta. Throws ShapeError on shape
/// mismatch, a Fixed cell that disagrees with its pattern, inconsistent
/// mirrored cells, or a sign-constraint violation.
VectorXd pack_theta(const SemSpec& spec, const ModelMatrices& values);
ModelMatrices unpack_theta(const SemSpec& spec, const VectorXd& theta);

/// Throws ShapeError if theta violates a nonzero/positive constraint.
void check_sign_constraints(const SemSpec& spec, const VectorXd& theta);

class ImpliedCov {
 public:
  ImpliedCov(SymMatrix sigma, Index p1);

  const SymMatrix& sigma() const { return sigma_; }
  Index p1() const { return p1_; }
  Index p2() const { return sigma_.order() - p1_; }
  MatrixXd block11() const { return sigma_.matrix().topLeftCorner(p1_, p1_); }
  MatrixXd block12() const { return sigma_.matrix().topRightCorner(p1_, p2()); }
  MatrixXd block22() const { return sigma_.matrix().bottomRightCorner(p2(), p2()); }

 private:
  SymMatrix sigma_;
  Index p1_;
};

/// Covariance structure from concrete matrices:
///   S11 = L1 Phi L1' + Td,  S12 = L1 Phi G' Psi^-T L2',
///   S22 = L2 Psi^-1 (G Phi G' + Z) Psi^-T L2' + Te,  Psi = I - B.
/// Throws SingularPsi when cond(I - B) > 1e12.
ImpliedCov implied_cov(const ModelMatrices& m);
ImpliedCov implied_cov(const SemSpec& spec, const VectorXd& theta);

/// Sigma(theta) together with the q partial derivatives dSigma/dtheta_j.
struct CovDerivatives {
  SymMatrix sigma;
  std::vector<MatrixXd> d_sigma;
};
CovDerivatives implied_cov_derivatives(const SemSpec& spec, const VectorXd& theta);

/// d vech Sigma / d theta', p(p+1)/2 x q, analytic.
MatrixXd jacobian_delta(const SemSpec& spec, const VectorXd& theta);

struct IdentifiabilityReport {
  Index q = 0;
  Index rank = 0;
  bool rank_ok = false;
  bool signs_ok = true;
  int trials = 0;
  int matched_trials = 0;          // probes that reproduced Sigma(theta0) to 1e-8
  std::vector<VectorXd> witnesses;  // distinct theta with the same Sigma
  /// Null-space direction of Delta when rank < q; its support names the
  /// collinear columns.
  std::optional<VectorXd> null_direction;
  std::vector<Index> collinear_columns;
  bool passed() const { return rank_ok && signs_ok && witnesses.empty(); }
};

IdentifiabilityReport check_identifiability(const SemSpec& spec, const VectorXd& theta0, int trials,
                                            std::uint64_t seed = 1);

struct Embedding {
  MatrixXd f;  // q_outer x q_inner, F'F = I
  VectorXd c;  // q_outer
};

/// Structural nesting: outer matrices at F theta + c equal inner matrices at
/// theta. Returns nullopt when the patterns do not align.
std::optional<Embedding> nested_embedding(const SemSpec& inner, const SemSpec& outer);

}  // namespace hfsem
