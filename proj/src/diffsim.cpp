#include "hfsem/diffsim.hpp"

#include <cmath>
#include <complex>
#include <string>

#include "hfsem/errors.hpp"
#include "hfsem/rng.hpp"
#include "hfsem/semspec.hpp"

namespace hfsem {

namespace {

/// (1 - exp(-a h)) / a, continuous at a = 0.
double phi(double a, double h) {
  if (std::abs(a * h) < 1e-12) return h;
  return -std::expm1(-a * h) / a;
}

bool is_diagonal(const MatrixXd& m) {
  for (Index j = 0; j < m.cols(); ++j)
    for (Index i = 0; i < m.rows(); ++i)
      if (i != j && m(i, j) != 0.0) return false;
  return true;
}

/// One-step transition x' = A x + b + L z for a time-homogeneous grid.
class OuStepper {
 public:
  OuStepper(const OuBlock& block, double h, OuScheme scheme) {
    const Index d = block.dim();
    if (scheme == OuScheme::euler) {
      A_ = MatrixXd::Identity(d, d) - h * block.mean_reversion;
      b_ = h * block.level;
      L_ = std::sqrt(h) * block.dispersion;
      return;
    }
    MatrixXd V, V_inv;
    VectorXd lambda;
    if (is_diagonal(block.mean_reversion)) {
      V = MatrixXd::Identity(d, d);
      V_inv = V;
      lambda = block.mean_reversion.diagonal();
    } else {
      Eigen::EigenSolver<MatrixXd> es(block.mean_reversion);
      if (es.info() != Eigen::Success || es.eigenvalues().imag().cwiseAbs().maxCoeff() > 1e-12 ||
          es.eigenvectors().imag().cwiseAbs().maxCoeff() > 1e-12) {
        throw ShapeError("exact OU sampler needs a mean-reversion matrix with real eigenvalues; "
                         "use the Euler scheme");
      }
      V = es.eigenvectors().real();
      lambda = es.eigenvalues().real();
      Eigen::FullPivLU<MatrixXd> lu(V);
      if (!lu.isInvertible()) throw ShapeError("exact OU sampler: mean-reversion matrix is defective");
      V_inv = lu.inverse();
    }
    VectorXd decay(d), drift_gain(d);
    for (Index i = 0; i < d; ++i) {
      decay(i) = std::exp(-lambda(i) * h);
      drift_gain(i) = phi(lambda(i), h);
    }
    A_ = V * decay.asDiagonal() * V_inv;
    b_ = V * drift_gain.asDiagonal() * V_inv * block.level;
    const MatrixXd s_tilde = V_inv * block.dispersion;
    MatrixXd cov = s_tilde * s_tilde.transpose();
    for (Index i = 0; i < d; ++i)
      for (Index j = 0; j < d; ++j) cov(i, j) *= phi(lambda(i) + lambda(j), h);
    cov = V * cov * V.transpose();
    cov = 0.5 * (cov + cov.transpose());
    if (is_diagonal(cov)) {
      L_ = cov.diagonal().cwiseMax(0.0).cwiseSqrt().asDiagonal();
    } else {
      // Symmetric square root; tolerates rank-deficient dispersion.
      Eigen::SelfAdjointEigenSolver<MatrixXd> eig(cov);
      L_ = eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
    }
  }

  Index noise_dim() const { return L_.cols(); }

  void step(VectorXd& x, VectorXd& z, std::mt19937_64& rng) {
    for (Index i = 0; i < z.size(); ++i) z(i) = normal_(rng);
    x = A_ * x + b_ + L_ * z;
  }

 private:
  MatrixXd A_;
  VectorXd b_;
  MatrixXd L_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

void check_grid(Index n, double T) {
  if (n < 1) throw ShapeError("simulation needs n >= 1");
  if (!(T > 0.0) || !std::isfinite(T)) throw ShapeError("simulation needs T > 0");
}

}  // namespace

void OuBlock::validate() const {
  const Index d = dim();
  if (mean_reversion.rows() != d || mean_reversion.cols() != d || dispersion.rows() != d ||
      init.size() != d) {
    throw ShapeError("OuBlock: inconsistent dimensions");
  }
  if (!mean_reversion.allFinite() || !level.allFinite() || !dispersion.allFinite() || !init.allFinite()) {
    throw ShapeError("OuBlock: non-finite parameter");
  }
}

MatrixXd simulate_ou(const OuBlock& block, Index n, double T, std::mt19937_64& rng, OuScheme scheme) {
  block.validate();
  check_grid(n, T);
  OuStepper stepper(block, T / static_cast<double>(n), scheme);
  MatrixXd path(n + 1, block.dim());
  VectorXd x = block.init;
  VectorXd z(stepper.noise_dim());
  path.row(0) = x.transpose();
  for (Index i = 1; i <= n; ++i) {
    stepper.step(x, z, rng);
    path.row(i) = x.transpose();
  }
  return path;
}

MatrixXd simulate_euler(const DriftFn& drift, const MatrixXd& dispersion, const VectorXd& init,
                        Index n, double T, std::mt19937_64& rng) {
  check_grid(n, T);
  if (dispersion.rows() != init.size()) throw ShapeError("simulate_euler: dispersion rows != dim");
  const double h = T / static_cast<double>(n);
  const double sqrt_h = std::sqrt(h);
  std::normal_distribution<double> normal(0.0, 1.0);
  MatrixXd path(n + 1, init.size());
  VectorXd x = init;
  VectorXd z(dispersion.cols());
  path.row(0) = x.transpose();
  for (Index i = 1; i <= n; ++i) {
    for (Index k = 0; k < z.size(); ++k) z(k) = normal(rng);
    x = x + h * drift(x) + sqrt_h * (dispersion * z);
    if (!x.allFinite()) throw Error("simulate_euler: path diverged");
    path.row(i) = x.transpose();
  }
  return path;
}

void TrueModel::validate() const {
  xi.validate();
  delta.validate();
  eps.validate();
  zeta.validate();
  const Index k1 = xi.dim(), k2 = zeta.dim();
  if (lambda_x1.rows() != delta.dim() || lambda_x1.cols() != k1 || lambda_x2.rows() != eps.dim() ||
      lambda_x2.cols() != k2 || b_mat.rows() != k2 || b_mat.cols() != k2 || gamma_mat.rows() != k2 ||
      gamma_mat.cols() != k1) {
    throw ShapeError("TrueModel: inconsistent dimensions");
  }
}

SymMatrix TrueModel::sigma0() const {
  validate();
  ModelMatrices m;
  m.lambda_x1 = lambda_x1;
  m.lambda_x2 = lambda_x2;
  m.b_mat = b_mat;
  m.gamma_mat = gamma_mat;
  m.sigma_xixi = xi.dispersion * xi.dispersion.transpose();
  m.sigma_dd = delta.dispersion * delta.dispersion.transpose();
  m.sigma_ee = eps.dispersion * eps.dispersion.transpose();
  m.sigma_zz = zeta.dispersion * zeta.dispersion.transpose();
  return implied_cov(m).sigma();
}

PathBundle simulate_custom(const TrueModel& model, Index n, double T, std::uint64_t seed,
                           const SimOptions& options) {
  model.validate();
  check_grid(n, T);
  const Index k2 = model.zeta.dim(), p1 = model.p1(), p2 = model.p2();
  Eigen::PartialPivLU<MatrixXd> psi_lu;
  if (k2 > 0) {
    const MatrixXd psi = MatrixXd::Identity(k2, k2) - model.b_mat;
    Eigen::JacobiSVD<MatrixXd> svd(psi);
    const VectorXd& s = svd.singularValues();
    if (!(s(s.size() - 1) > 0.0) || s(0) / s(s.size() - 1) > 1e12) {
      throw SingularPsi("TrueModel: I - B is numerically singular");
    }
    psi_lu.compute(psi);
  }

  const double h = T / static_cast<double>(n);
  const OuBlock* blocks[4] = {&model.xi, &model.delta, &model.eps, &model.zeta};
  std::vector<OuStepper> steppers;
  std::vector<std::mt19937_64> rngs;
  std::vector<VectorXd> state, noise;
  for (int k = 0; k < 4; ++k) {
    steppers.emplace_back(*blocks[k], h, options.scheme);
    rngs.emplace_back(split_seed(seed, {static_cast<std::uint64_t>(k)}));
    state.push_back(blocks[k]->init);
    noise.emplace_back(steppers.back().noise_dim());
  }

  PathBundle b;
  b.n = n;
  b.T = T;
  b.h = h;
  b.seed = seed;
  b.has_latents = options.keep_latents;
  b.x_obs.resize(n + 1, p1 + p2);
  if (options.keep_latents) {
    b.xi.resize(n + 1, model.xi.dim());
    b.delta.resize(n + 1, p1);
    b.eps.resize(n + 1, p2);
    b.zeta.resize(n + 1, k2);
    b.eta.resize(n + 1, k2);
  }

  VectorXd eta(k2);
  for (Index i = 0; i <= n; ++i) {
    if (i > 0) {
      for (int k = 0; k < 4; ++k) steppers[k].step(state[k], noise[k], rngs[k]);
    }
    const VectorXd& xi = state[0];
    const VectorXd& delta = state[1];
    const VectorXd& eps = state[2];
    const VectorXd& zeta = state[3];
    if (k2 > 0) eta = psi_lu.solve(model.gamma_mat * xi + zeta);
    b.x_obs.row(i).head(p1) = (model.lambda_x1 * xi + delta).transpose();
    b.x_obs.row(i).tail(p2) = (model.lambda_x2 * eta + eps).transpose();
    if (options.keep_latents) {
      b.xi.row(i) = xi.transpose();
      b.delta.row(i) = delta.transpose();
      b.eps.row(i) = eps.transpose();
      b.zeta.row(i) = zeta.transpose();
      b.eta.row(i) = eta.transpose();
    }
  }
  return b;
}

TrueModel true_model_4_6() {
  TrueModel m;
  auto diag = [](std::initializer_list<double> v) {
    VectorXd d(static_cast<Index>(v.size()));
    Index i = 0;
    for (double x : v) d(i++) = x;
    return MatrixXd(d.asDiagonal());
  };
  auto vecd = [](std::initializer_list<double> v) {
    VectorXd d(static_cast<Index>(v.size()));
    Index i = 0;
    for (double x : v) d(i++) = x;
    return d;
  };
  m.xi = {diag({2}), vecd({5}), diag({3}), vecd({3})};
  m.delta = {diag({5, 2, 1, 3}), vecd({4, 2, 1, 2}), diag({2, 1, 2, 3}), VectorXd::Zero(4)};
  m.eps = {diag({1, 5, 2, 3, 2, 2}), vecd({2, 1, 3, 2, 1, 4}), diag({5, 1, 2, 1, 3, 2}), VectorXd::Zero(6)};
  m.zeta = {diag({3, 2}), vecd({1, 2}), diag({3, 1}), VectorXd::Zero(2)};
  m.lambda_x1 = vecd({1, 3, 4, 6});
  m.lambda_x2 = MatrixXd::Zero(6, 2);
  m.lambda_x2.col(0) << 1, 3, 2, 0, 0, 0;
  m.lambda_x2.col(1) << 0, 0, 0, 1, 2, 4;
  m.b_mat = MatrixXd::Zero(2, 2);
  m.gamma_mat = vecd({3, 2});
  return m;
}

PathBundle simulate_true_model(Index n, double T, std::uint64_t seed, const SimOptions& options) {
  return simulate_custom(true_model_4_6(), n, T, seed, options);
}

}  // namespace hfsem
