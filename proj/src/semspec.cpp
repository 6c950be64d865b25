#include "hfsem/semspec.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "hfsem/errors.hpp"

namespace hfsem {

namespace {

constexpr double kPsiConditionLimit = 1e12;

constexpr std::array<PatternKind, kPatternCount> kAllKinds = {
    PatternKind::lambda_x1,  PatternKind::lambda_x2, PatternKind::b_mat,    PatternKind::gamma_mat,
    PatternKind::sigma_xixi, PatternKind::sigma_dd,  PatternKind::sigma_ee, PatternKind::sigma_zz};

bool is_covariance(PatternKind kind) {
  return kind == PatternKind::sigma_xixi || kind == PatternKind::sigma_dd ||
         kind == PatternKind::sigma_ee || kind == PatternKind::sigma_zz;
}

MatrixXd& member(ModelMatrices& m, PatternKind kind) {
  switch (kind) {
    case PatternKind::lambda_x1: return m.lambda_x1;
    case PatternKind::lambda_x2: return m.lambda_x2;
    case PatternKind::b_mat: return m.b_mat;
    case PatternKind::gamma_mat: return m.gamma_mat;
    case PatternKind::sigma_xixi: return m.sigma_xixi;
    case PatternKind::sigma_dd: return m.sigma_dd;
    case PatternKind::sigma_ee: return m.sigma_ee;
    case PatternKind::sigma_zz: return m.sigma_zz;
  }
  throw Error("unreachable pattern kind");
}

const MatrixXd& member(const ModelMatrices& m, PatternKind kind) {
  return member(const_cast<ModelMatrices&>(m), kind);
}

std::string cell_name(PatternKind kind, Index i, Index j) {
  return std::string(pattern_name(kind)) + "(" + std::to_string(i) + "," + std::to_string(j) + ")";
}

/// Inverse of Psi = I - B with the conditioning gate.
MatrixXd psi_inverse(const MatrixXd& b) {
  const Index k = b.rows();
  if (k == 0) return MatrixXd(0, 0);
  const MatrixXd psi = MatrixXd::Identity(k, k) - b;
  Eigen::JacobiSVD<MatrixXd> svd(psi);
  const VectorXd& s = svd.singularValues();
  const double smin = s(s.size() - 1);
  if (!(smin > 0.0) || s(0) / smin > kPsiConditionLimit) {
    throw SingularPsi("I - B is numerically singular (condition > 1e12)");
  }
  return psi.partialPivLu().inverse();
}

}  // namespace

const char* pattern_name(PatternKind kind) {
  switch (kind) {
    case PatternKind::lambda_x1: return "lambda_x1";
    case PatternKind::lambda_x2: return "lambda_x2";
    case PatternKind::b_mat: return "b_mat";
    case PatternKind::gamma_mat: return "gamma_mat";
    case PatternKind::sigma_xixi: return "sigma_xixi";
    case PatternKind::sigma_dd: return "sigma_dd";
    case PatternKind::sigma_ee: return "sigma_ee";
    case PatternKind::sigma_zz: return "sigma_zz";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// PatternMatrix

PatternMatrix::PatternMatrix(Index rows, Index cols)
    : rows_(rows), cols_(cols), cells_(static_cast<size_t>(rows * cols), FixedCell{0.0}) {
  if (rows < 0 || cols < 0) throw ShapeError("PatternMatrix: negative dimension");
}

PatternMatrix PatternMatrix::fixed(const MatrixXd& values) {
  PatternMatrix out(values.rows(), values.cols());
  for (Index i = 0; i < values.rows(); ++i)
    for (Index j = 0; j < values.cols(); ++j) out.set_fixed(i, j, values(i, j));
  return out;
}

PatternMatrix& PatternMatrix::set_fixed(Index i, Index j, double v) {
  if (i < 0 || i >= rows_ || j < 0 || j >= cols_) throw ShapeError("PatternMatrix: cell out of range");
  cells_[static_cast<size_t>(i * cols_ + j)] = FixedCell{v};
  return *this;
}

PatternMatrix& PatternMatrix::set_free(Index i, Index j, int index, SignConstraint constraint) {
  if (i < 0 || i >= rows_ || j < 0 || j >= cols_) throw ShapeError("PatternMatrix: cell out of range");
  if (index < 0) throw ShapeError("PatternMatrix: negative parameter index");
  cells_[static_cast<size_t>(i * cols_ + j)] = FreeCell{index, constraint};
  return *this;
}

MatrixXd PatternMatrix::fill(const VectorXd& theta) const {
  MatrixXd out(rows_, cols_);
  for (Index i = 0; i < rows_; ++i) {
    for (Index j = 0; j < cols_; ++j) {
      const Cell& c = at(i, j);
      if (const auto* f = std::get_if<FixedCell>(&c)) {
        out(i, j) = f->value;
      } else {
        out(i, j) = theta(std::get<FreeCell>(c).index);
      }
    }
  }
  return out;
}

bool operator==(const FixedCell& a, const FixedCell& b) { return a.value == b.value; }
bool operator==(const FreeCell& a, const FreeCell& b) {
  return a.index == b.index && a.constraint == b.constraint;
}
bool operator==(const PatternMatrix& a, const PatternMatrix& b) {
  return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.cells_ == b.cells_;
}

const PatternMatrix& SemPatterns::get(PatternKind kind) const {
  switch (kind) {
    case PatternKind::lambda_x1: return lambda_x1;
    case PatternKind::lambda_x2: return lambda_x2;
    case PatternKind::b_mat: return b_mat;
    case PatternKind::gamma_mat: return gamma_mat;
    case PatternKind::sigma_xixi: return sigma_xixi;
    case PatternKind::sigma_dd: return sigma_dd;
    case PatternKind::sigma_ee: return sigma_ee;
    case PatternKind::sigma_zz: return sigma_zz;
  }
  throw Error("unreachable pattern kind");
}

// ---------------------------------------------------------------------------
// SemSpec

SemSpec::SemSpec(std::string id, SemPatterns patterns, std::optional<Bounds> bounds,
                 std::optional<VectorXd> reference_theta)
    : id_(std::move(id)), patterns_(std::move(patterns)), reference_theta_(std::move(reference_theta)) {
  const Index p1 = this->p1(), p2 = this->p2(), k1 = this->k1(), k2 = this->k2();
  auto expect = [](const PatternMatrix& m, Index r, Index c, PatternKind kind) {
    if (m.rows() != r || m.cols() != c) {
      throw ShapeError(std::string(pattern_name(kind)) + ": expected " + std::to_string(r) + "x" +
                       std::to_string(c) + ", got " + std::to_string(m.rows()) + "x" +
                       std::to_string(m.cols()));
    }
  };
  if (p1 < 1) throw ShapeError("SemSpec: p1 must be >= 1");
  if (k1 > p1 || k2 > p2) throw ShapeError("SemSpec: need k1 <= p1 and k2 <= p2");
  expect(patterns_.b_mat, k2, k2, PatternKind::b_mat);
  expect(patterns_.gamma_mat, k2, k1, PatternKind::gamma_mat);
  expect(patterns_.sigma_xixi, k1, k1, PatternKind::sigma_xixi);
  expect(patterns_.sigma_dd, p1, p1, PatternKind::sigma_dd);
  expect(patterns_.sigma_ee, p2, p2, PatternKind::sigma_ee);
  expect(patterns_.sigma_zz, k2, k2, PatternKind::sigma_zz);

  for (Index i = 0; i < k2; ++i) {
    const auto* f = std::get_if<FixedCell>(&patterns_.b_mat.at(i, i));
    if (f == nullptr || f->value != 0.0) throw ShapeError("b_mat: diagonal must be fixed at 0");
  }

  // Covariance patterns must be symmetric cell-for-cell.
  for (PatternKind kind : kAllKinds) {
    if (!is_covariance(kind)) continue;
    const PatternMatrix& m = patterns_.get(kind);
    for (Index i = 0; i < m.rows(); ++i) {
      for (Index j = 0; j < i; ++j) {
        if (!(m.at(i, j) == m.at(j, i))) {
          throw ShapeError(cell_name(kind, i, j) + ": covariance pattern is not symmetric");
        }
      }
    }
  }

  // Collect cells per index. Mirrored covariance cells legitimately share one.
  int max_index = -1;
  for (PatternKind kind : kAllKinds) {
    const PatternMatrix& m = patterns_.get(kind);
    for (Index i = 0; i < m.rows(); ++i)
      for (Index j = 0; j < m.cols(); ++j)
        if (const auto* f = std::get_if<FreeCell>(&m.at(i, j))) max_index = std::max(max_index, f->index);
  }
  q_ = max_index + 1;
  cells_of_.assign(static_cast<size_t>(q_), {});
  constraints_.assign(static_cast<size_t>(q_), SignConstraint::none);
  variance_mask_.assign(static_cast<size_t>(q_), false);
  for (PatternKind kind : kAllKinds) {
    const PatternMatrix& m = patterns_.get(kind);
    for (Index i = 0; i < m.rows(); ++i) {
      for (Index j = 0; j < m.cols(); ++j) {
        const auto* f = std::get_if<FreeCell>(&m.at(i, j));
        if (f == nullptr) continue;
        auto& refs = cells_of_[static_cast<size_t>(f->index)];
        const bool mirror_of_existing = is_covariance(kind) && refs.size() == 1 &&
                                        refs[0].kind == kind && refs[0].row == j && refs[0].col == i;
        if (!refs.empty() && !mirror_of_existing) {
          throw ShapeError("parameter index " + std::to_string(f->index + 1) +
                           " appears in more than one cell (" + cell_name(kind, i, j) + ")");
        }
        refs.push_back({kind, i, j});
        constraints_[static_cast<size_t>(f->index)] = f->constraint;
        if (is_covariance(kind) && i == j) variance_mask_[static_cast<size_t>(f->index)] = true;
      }
    }
  }
  for (Index j = 0; j < q_; ++j) {
    if (cells_of_[static_cast<size_t>(j)].empty()) {
      throw ShapeError("parameter indices must be contiguous; index " + std::to_string(j + 1) +
                       " is unused");
    }
  }

  bounds_ = bounds ? std::move(*bounds) : default_bounds();
  if (bounds_.lower.size() != q_ || bounds_.upper.size() != q_) {
    throw ShapeError("bounds: expected " + std::to_string(q_) + " entries");
  }
  for (Index j = 0; j < q_; ++j) {
    if (!(bounds_.lower(j) <= bounds_.upper(j))) throw ShapeError("bounds: lower > upper");
    if (variance_mask_[static_cast<size_t>(j)] && !(bounds_.lower(j) > 0.0)) {
      throw ShapeError("bounds: variance parameter " + std::to_string(j + 1) +
                       " needs a positive lower bound");
    }
  }
  if (reference_theta_ && reference_theta_->size() != q_) {
    throw ShapeError("reference_theta: expected " + std::to_string(q_) + " entries");
  }
}

Bounds SemSpec::default_bounds() const {
  Bounds b{VectorXd::Constant(q_, -kLoadingBound), VectorXd::Constant(q_, kLoadingBound)};
  for (Index j = 0; j < q_; ++j) {
    if (variance_mask_[static_cast<size_t>(j)]) {
      b.lower(j) = kVarianceLower;
      b.upper(j) = kVarianceUpper;
    }
  }
  return b;
}

bool SemSpec::in_bounds(const VectorXd& theta) const {
  return theta.size() == q_ && (theta.array() >= bounds_.lower.array()).all() &&
         (theta.array() <= bounds_.upper.array()).all();
}

VectorXd SemSpec::project(const VectorXd& theta) const {
  return theta.cwiseMax(bounds_.lower).cwiseMin(bounds_.upper);
}

// ---------------------------------------------------------------------------
// Packing

void check_sign_constraints(const SemSpec& spec, const VectorXd& theta) {
  for (Index j = 0; j < spec.q(); ++j) {
    const SignConstraint c = spec.constraint(j);
    if (c == SignConstraint::nonzero && theta(j) == 0.0) {
      throw ShapeError("parameter " + std::to_string(j + 1) + " must be nonzero");
    }
    if (c == SignConstraint::positive && !(theta(j) > 0.0)) {
      throw ShapeError("parameter " + std::to_string(j + 1) + " must be positive");
    }
  }
}

VectorXd pack_theta(const SemSpec& spec, const ModelMatrices& values) {
  VectorXd theta = VectorXd::Constant(spec.q(), std::nan(""));
  for (PatternKind kind : kAllKinds) {
    const PatternMatrix& pat = spec.patterns().get(kind);
    const MatrixXd& v = member(values, kind);
    if (v.rows() != pat.rows() || v.cols() != pat.cols()) {
      throw ShapeError(std::string(pattern_name(kind)) + ": value shape does not match pattern");
    }
    for (Index i = 0; i < pat.rows(); ++i) {
      for (Index j = 0; j < pat.cols(); ++j) {
        const Cell& c = pat.at(i, j);
        if (const auto* f = std::get_if<FixedCell>(&c)) {
          if (v(i, j) != f->value) throw ShapeError(cell_name(kind, i, j) + ": differs from fixed value");
          continue;
        }
        const int idx = std::get<FreeCell>(c).index;
        if (!std::isnan(theta(idx)) && theta(idx) != v(i, j)) {
          throw ShapeError(cell_name(kind, i, j) + ": mirrored cells disagree");
        }
        theta(idx) = v(i, j);
      }
    }
  }
  check_sign_constraints(spec, theta);
  return theta;
}

ModelMatrices unpack_theta(const SemSpec& spec, const VectorXd& theta) {
  if (theta.size() != spec.q()) {
    throw ShapeError("theta: expected " + std::to_string(spec.q()) + " entries, got " +
                     std::to_string(theta.size()));
  }
  ModelMatrices m;
  for (PatternKind kind : kAllKinds) member(m, kind) = spec.patterns().get(kind).fill(theta);
  return m;
}

// ---------------------------------------------------------------------------
// Implied covariance

ImpliedCov::ImpliedCov(SymMatrix sigma, Index p1) : sigma_(std::move(sigma)), p1_(p1) {}

namespace {

/// Sigma = G C G' + D with G = L M, L = diag(L1, L2),
/// M = [[I, 0], [Psi^-1 Gamma, Psi^-1]], C = diag(Phi, Z), D = diag(Td, Te).
struct Factorization {
  Index p1, p2, k1, k2;
  MatrixXd psi_inv, L, M, C, D, G;
};

Factorization factorize(const ModelMatrices& m) {
  Factorization f;
  f.p1 = m.lambda_x1.rows();
  f.p2 = m.lambda_x2.rows();
  f.k1 = m.lambda_x1.cols();
  f.k2 = m.lambda_x2.cols();
  const Index p = f.p1 + f.p2, k = f.k1 + f.k2;
  f.psi_inv = psi_inverse(m.b_mat);
  f.L = MatrixXd::Zero(p, k);
  f.L.topLeftCorner(f.p1, f.k1) = m.lambda_x1;
  f.L.bottomRightCorner(f.p2, f.k2) = m.lambda_x2;
  f.M = MatrixXd::Identity(k, k);
  f.M.bottomLeftCorner(f.k2, f.k1) = f.psi_inv * m.gamma_mat;
  f.M.bottomRightCorner(f.k2, f.k2) = f.psi_inv;
  f.C = MatrixXd::Zero(k, k);
  f.C.topLeftCorner(f.k1, f.k1) = m.sigma_xixi;
  f.C.bottomRightCorner(f.k2, f.k2) = m.sigma_zz;
  f.D = MatrixXd::Zero(p, p);
  f.D.topLeftCorner(f.p1, f.p1) = m.sigma_dd;
  f.D.bottomRightCorner(f.p2, f.p2) = m.sigma_ee;
  f.G = f.L * f.M;
  return f;
}

SymMatrix assemble(const Factorization& f) {
  MatrixXd s = f.G * f.C * f.G.transpose() + f.D;
  return SymMatrix::from_lower(s);
}

}  // namespace

ImpliedCov implied_cov(const ModelMatrices& m) {
  const Factorization f = factorize(m);
  return ImpliedCov(assemble(f), f.p1);
}

ImpliedCov implied_cov(const SemSpec& spec, const VectorXd& theta) {
  return implied_cov(unpack_theta(spec, theta));
}

CovDerivatives implied_cov_derivatives(const SemSpec& spec, const VectorXd& theta) {
  const ModelMatrices m = unpack_theta(spec, theta);
  const Factorization f = factorize(m);
  const Index p = f.p1 + f.p2, k = f.k1 + f.k2;
  CovDerivatives out{assemble(f), {}};
  out.d_sigma.reserve(static_cast<size_t>(spec.q()));
  const MatrixXd CGt = f.C * f.G.transpose();

  for (Index j = 0; j < spec.q(); ++j) {
    MatrixXd dL = MatrixXd::Zero(p, k), dM = MatrixXd::Zero(k, k), dC = MatrixXd::Zero(k, k),
             dD = MatrixXd::Zero(p, p);
    bool touches_g = false, touches_c = false;
    for (const auto& ref : spec.cells_of(j)) {
      const Index r = ref.row, c = ref.col;
      switch (ref.kind) {
        case PatternKind::lambda_x1:
          dL(r, c) += 1.0;
          touches_g = true;
          break;
        case PatternKind::lambda_x2:
          dL(f.p1 + r, f.k1 + c) += 1.0;
          touches_g = true;
          break;
        case PatternKind::gamma_mat:
          dM.block(f.k1, c, f.k2, 1) += f.psi_inv.col(r);
          touches_g = true;
          break;
        case PatternKind::b_mat: {
          // d(Psi^-1) = Psi^-1 E_rc Psi^-1
          const MatrixXd d_psi_inv = f.psi_inv.col(r) * f.psi_inv.row(c);
          dM.bottomLeftCorner(f.k2, f.k1) += d_psi_inv * m.gamma_mat;
          dM.bottomRightCorner(f.k2, f.k2) += d_psi_inv;
          touches_g = true;
          break;
        }
        case PatternKind::sigma_xixi:
          dC(r, c) += 1.0;
          touches_c = true;
          break;
        case PatternKind::sigma_zz:
          dC(f.k1 + r, f.k1 + c) += 1.0;
          touches_c = true;
          break;
        case PatternKind::sigma_dd:
          dD(r, c) += 1.0;
          break;
        case PatternKind::sigma_ee:
          dD(f.p1 + r, f.p1 + c) += 1.0;
          break;
      }
    }
    MatrixXd d = dD;
    if (touches_g) {
      const MatrixXd dG = dL * f.M + f.L * dM;
      const MatrixXd x = dG * CGt;
      d += x + x.transpose();
    }
    if (touches_c) d += f.G * dC * f.G.transpose();
    out.d_sigma.push_back(std::move(d));
  }
  return out;
}

MatrixXd jacobian_delta(const SemSpec& spec, const VectorXd& theta) {
  const CovDerivatives cd = implied_cov_derivatives(spec, theta);
  const Index p = cd.sigma.order();
  MatrixXd delta(vech_length(p), spec.q());
  for (Index j = 0; j < spec.q(); ++j) delta.col(j) = vech(cd.d_sigma[static_cast<size_t>(j)]);
  return delta;
}

// ---------------------------------------------------------------------------
// Identifiability

namespace {

/// Levenberg-Marquardt on vech(Sigma(theta) - target) inside the box.
/// Returns the final iterate and residual Frobenius norm.
std::pair<VectorXd, double> match_covariance(const SemSpec& spec, const MatrixXd& target,
                                             VectorXd theta) {
  auto residual_norm = [&](const VectorXd& t) -> double {
    try {
      return (implied_cov(spec, t).sigma().matrix() - target).norm();
    } catch (const SingularPsi&) {
      return std::numeric_limits<double>::infinity();
    }
  };
  // Off-diagonal vech entries count twice in the Frobenius norm.
  const Index p = target.rows();
  VectorXd w(vech_length(p));
  {
    Index k = 0;
    for (Index j = 0; j < p; ++j)
      for (Index i = j; i < p; ++i) w(k++) = (i == j) ? 1.0 : std::sqrt(2.0);
  }
  const VectorXd target_vech = vech(target);
  double lambda = 1e-3;
  double current = residual_norm(theta);
  for (int iter = 0; iter < 400 && current > 1e-13 * (1.0 + target.norm()); ++iter) {
    MatrixXd J;
    VectorXd r;
    try {
      J = w.asDiagonal() * jacobian_delta(spec, theta);
      r = w.cwiseProduct(vech(implied_cov(spec, theta).sigma()) - target_vech);
    } catch (const SingularPsi&) {
      break;
    }
    const MatrixXd JtJ = J.transpose() * J;
    const VectorXd Jtr = J.transpose() * r;
    bool improved = false;
    for (int attempt = 0; attempt < 30; ++attempt) {
      MatrixXd A = JtJ;
      A.diagonal().array() += lambda * (1.0 + JtJ.diagonal().array());
      const VectorXd step = A.ldlt().solve(-Jtr);
      const VectorXd cand = spec.project(theta + step);
      const double val = residual_norm(cand);
      if (val < current) {
        theta = cand;
        current = val;
        lambda = std::max(lambda / 10.0, 1e-15);
        improved = true;
        break;
      }
      lambda *= 10.0;
    }
    if (!improved) break;
  }
  return {theta, current};
}

}  // namespace

IdentifiabilityReport check_identifiability(const SemSpec& spec, const VectorXd& theta0, int trials,
                                            std::uint64_t seed) {
  IdentifiabilityReport rep;
  rep.q = spec.q();
  rep.trials = trials;
  try {
    check_sign_constraints(spec, theta0);
  } catch (const ShapeError&) {
    rep.signs_ok = false;
  }
  const MatrixXd delta = jacobian_delta(spec, theta0);
  Eigen::BDCSVD<MatrixXd> svd(delta, Eigen::ComputeFullV);
  rep.rank = numeric_rank(delta);
  rep.rank_ok = rep.rank == rep.q;
  if (!rep.rank_ok && rep.q > 0) {
    const VectorXd v = svd.matrixV().col(rep.q - 1);
    rep.null_direction = v;
    for (Index j = 0; j < rep.q; ++j)
      if (std::abs(v(j)) > 1e-6) rep.collinear_columns.push_back(j);
  }

  const MatrixXd target = implied_cov(spec, theta0).sigma().matrix();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  for (int t = 0; t < trials; ++t) {
    VectorXd start(spec.q());
    for (Index j = 0; j < spec.q(); ++j) {
      const double u = unif(rng);
      start(j) = spec.variance_mask()[static_cast<size_t>(j)] ? theta0(j) * std::exp(u)
                                                               : theta0(j) + u * (1.0 + std::abs(theta0(j)));
    }
    start = spec.project(start);
    auto [theta, resid] = match_covariance(spec, target, start);
    if (resid < 1e-8) {
      ++rep.matched_trials;
      if ((theta - theta0).norm() >= 1e-6) rep.witnesses.push_back(theta);
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Nesting

std::optional<Embedding> nested_embedding(const SemSpec& inner, const SemSpec& outer) {
  if (inner.q() > outer.q()) return std::nullopt;
  for (PatternKind kind : kAllKinds) {
    const auto& a = inner.patterns().get(kind);
    const auto& b = outer.patterns().get(kind);
    if (a.rows() != b.rows() || a.cols() != b.cols()) return std::nullopt;
  }
  const auto qi = static_cast<size_t>(inner.q()), qo = static_cast<size_t>(outer.q());
  std::vector<int> inner_to_outer(qi, -1);
  // Outer parameter role: -1 unassigned, >= 0 mapped from that inner index, -2 pinned to c.
  std::vector<int> outer_role(qo, -1);
  VectorXd c = VectorXd::Zero(outer.q());

  for (PatternKind kind : kAllKinds) {
    const auto& a = inner.patterns().get(kind);
    const auto& b = outer.patterns().get(kind);
    for (Index i = 0; i < a.rows(); ++i) {
      for (Index j = 0; j < a.cols(); ++j) {
        const Cell& ca = a.at(i, j);
        const Cell& cb = b.at(i, j);
        const auto* fa = std::get_if<FixedCell>(&ca);
        const auto* fb = std::get_if<FixedCell>(&cb);
        if (fa && fb) {
          if (fa->value != fb->value) return std::nullopt;
        } else if (!fa && fb) {
          return std::nullopt;
        } else if (fa && !fb) {
          const auto jo = static_cast<size_t>(std::get<FreeCell>(cb).index);
          if (outer_role[jo] >= 0) return std::nullopt;
          if (outer_role[jo] == -2 && c(static_cast<Index>(jo)) != fa->value) return std::nullopt;
          outer_role[jo] = -2;
          c(static_cast<Index>(jo)) = fa->value;
        } else {
          const int ji = std::get<FreeCell>(ca).index;
          const int jo = std::get<FreeCell>(cb).index;
          auto& mapped = inner_to_outer[static_cast<size_t>(ji)];
          if (mapped != -1 && mapped != jo) return std::nullopt;
          const int role = outer_role[static_cast<size_t>(jo)];
          if (role == -2 || (role >= 0 && role != ji)) return std::nullopt;
          mapped = jo;
          outer_role[static_cast<size_t>(jo)] = ji;
        }
      }
    }
  }
  Embedding e{MatrixXd::Zero(outer.q(), inner.q()), c};
  for (size_t ji = 0; ji < qi; ++ji) {
    if (inner_to_outer[ji] < 0) return std::nullopt;
    e.f(inner_to_outer[ji], static_cast<Index>(ji)) = 1.0;
  }
  for (int role : outer_role)
    if (role == -1) return std::nullopt;
  return e;
}

}  // namespace hfsem
