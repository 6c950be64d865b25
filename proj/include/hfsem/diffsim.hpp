#pragma once

// Simulation of latent Ornstein-Uhlenbeck factors and the observed
// high-frequency factor-model process.

#include <cstdint>
#include <functional>
#include <random>

#include "hfsem/matkit.hpp"

namespace hfsem {

/// dX = -(mean_reversion X - level) dt + dispersion dW, X_0 = init.
struct OuBlock {
  MatrixXd mean_reversion;  // dim x dim
  VectorXd level;           // dim
  MatrixXd dispersion;      // dim x r, any r
  VectorXd init;            // dim

  Index dim() const { return level.size(); }
  /// Throws ShapeError on inconsistent shapes or non-finite entries.
  void validate() const;
};

enum class OuScheme { exact, euler };

/// Sample path on t_i = i T/n, (n+1) x dim. The exact scheme draws from the
/// Gaussian transition law and requires a mean-reversion matrix that is
/// diagonalizable with real eigenvalues.
MatrixXd simulate_ou(const OuBlock& block, Index n, double T, std::mt19937_64& rng,
                     OuScheme scheme = OuScheme::exact);

using DriftFn = std::function<VectorXd(const VectorXd&)>;

/// Euler-Maruyama for dX = drift(X) dt + dispersion dW.
MatrixXd simulate_euler(const DriftFn& drift, const MatrixXd& dispersion, const VectorXd& init,
                        Index n, double T, std::mt19937_64& rng);

/// The data-generating factor model: four independent latent OU blocks and
/// the loading/structural matrices.
struct TrueModel {
  OuBlock xi;     // k1
  OuBlock delta;  // p1
  OuBlock eps;    // p2
  OuBlock zeta;   // k2
  MatrixXd lambda_x1;  // p1 x k1
  MatrixXd lambda_x2;  // p2 x k2
  MatrixXd b_mat;      // k2 x k2
  MatrixXd gamma_mat;  // k2 x k1

  Index p1() const { return lambda_x1.rows(); }
  Index p2() const { return lambda_x2.rows(); }
  Index p() const { return p1() + p2(); }
  void validate() const;
  /// Diffusion covariance of the observed process (the limit of Q_XX).
  SymMatrix sigma0() const;
};

struct SimOptions {
  OuScheme scheme = OuScheme::exact;
  bool keep_latents = true;  // false stores only x_obs
};

struct PathBundle {
  Index n = 0;
  double T = 0.0;
  double h = 0.0;
  std::uint64_t seed = 0;
  bool has_latents = false;
  MatrixXd xi, delta, eps, zeta, eta;  // (n+1) x dim each, empty in slim mode
  MatrixXd x_obs;                      // (n+1) x p
};

/// Deterministic in `seed`. Block k (xi, delta, eps, zeta) draws from its own
/// stream seeded by split_seed(seed, k).
PathBundle simulate_custom(const TrueModel& model, Index n, double T, std::uint64_t seed,
                           const SimOptions& options = {});

/// The four-indicator / six-indicator truth with one exogenous and two
/// endogenous factors.
TrueModel true_model_4_6();

PathBundle simulate_true_model(Index n, double T, std::uint64_t seed, const SimOptions& options = {});

}  // namespace hfsem
