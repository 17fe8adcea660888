#pragma once

#include <cstdint>
#include <vector>

#include "vbspca/core_data.hpp"
#include "vbspca/types.hpp"

namespace vbspca {

// Low-rank factorization X = P T^T + Xbar + noise with component-shared
// ARD precisions on the columns of P and T (columns die together, which
// prunes rank), an entrywise sparse offset Xbar under a Jeffreys prior,
// and a global noise precision. Fit by mean-field coordinate ascent.

struct GaussianHyper {
  double a0 = 1e-5;  // ARD Gamma shape
  double b0 = 1e-5;  // ARD Gamma rate
  int r_max = 10;
  int max_iters = 500;
  double tol = 1e-5;  // relative ELBO change
  // Components are dropped once their ARD precision exceeds this. On
  // standardized data a live component's precision settles near
  // sqrt(rank/variance share), single digits, while a noise-floor
  // component stalls above 20 at 20 dB SNR; the default
  // sits in the gap.
  double prune_threshold = 10.0;
};

struct GaussianState {
  Matrix mu_P;       // m x k posterior means, rows share covariance sigma_P
  Matrix sigma_P;    // k x k
  Matrix mu_T;       // n x k
  Matrix sigma_T;    // k x k
  Matrix mu_xbar;    // m x n
  Matrix sigma_xbar; // m x n entrywise variances
  Vector e_gamma;    // k ARD precision means
  Matrix e_alpha;    // m x n offset precision means
  double e_beta = 1.0;
  std::vector<bool> active;  // sticky: once false, never reactivated

  Index components() const { return mu_P.cols(); }
  int active_count() const;
  std::vector<int> active_indices() const;
};

struct GaussianModel {
  Matrix loading;       // m x r, orthonormal columns
  Vector latent_scale;  // per-component variance of the score means
  double noise_precision = 0.0;
  Vector mean_correction;  // per-sensor average of the fitted offset
  int rank = 0;
  bool converged = false;
};

struct FitTrace {
  std::vector<double> elbo;     // one entry per sweep, post-sweep value
  std::vector<int> active;      // active component count per sweep
  int iterations = 0;
  bool converged = false;
};

/// Truncated-SVD warm start. The seed is stored for provenance only; the
/// SVD itself is deterministic.
GaussianState init_state(const DataMatrix& X, const GaussianHyper& hyper,
                         std::uint64_t seed);

/// One full coordinate sweep P -> T -> Xbar -> gamma -> alpha -> beta over
/// the active components. Each update is the exact mean-field optimum, so
/// the ELBO cannot decrease.
void sweep_gaussian(GaussianState& state, const Matrix& X,
                    const GaussianHyper& hyper);

/// Evidence lower bound of the current factorized posterior (active
/// components only).
double compute_elbo(const GaussianState& state, const Matrix& X,
                    const GaussianHyper& hyper);

/// Deactivates components whose ARD precision exceeds the threshold,
/// zeroing their columns. Returns the number newly removed.
int prune(GaussianState& state, const GaussianHyper& hyper);

/// Full pipeline: init, sweep/prune to ELBO convergence, orthonormalize
/// the surviving loading columns (QR, largest-|entry| positive).
GaussianModel fit_gaussian(const DataMatrix& X, const GaussianHyper& hyper,
                           std::uint64_t seed, FitTrace* trace = nullptr);

/// Latent score of a standardized measurement: loading^T y.
Vector project(const GaussianModel& model, const Vector& y);

// Update building blocks, exposed for direct verification.

/// (noise_prec * gram + diag(prior_prec))^{-1}, symmetrized.
Matrix posterior_row_covariance(const Matrix& gram, double noise_prec,
                                const Vector& prior_prec);

struct GammaPosterior {
  double shape;
  double rate;
  double mean;
};

/// ARD update for one component: shape a0+(m+n)/2, rate b0+(E[p'p]+E[t't])/2.
GammaPosterior gamma_update(double a0, double b0, Index m, Index n,
                            double e_pp, double e_tt);

/// QR orthonormalization with each column's largest-|entry| made positive.
Matrix orthonormalize_loading(const Matrix& columns);

}  // namespace vbspca
