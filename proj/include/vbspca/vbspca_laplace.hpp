#pragma once

#include <cstdint>
#include <vector>

#include "vbspca/core_data.hpp"
#include "vbspca/types.hpp"

namespace vbspca {

// Fixed-rank factorization x_i = P t_i + xbar + noise where each loading
// entry carries a Gaussian-exponential (i.e. Laplace) prior. The
// exponential scale mixture keeps the model conjugate; the per-entry
// variances eta act as reweighted shrinkage, heavier in the tails than
// the ARD model's.

struct LaplaceHyper {
  double varphi = 1.0;    // Laplace scale (exponential mean of eta)
  double c0 = 1e-5;       // noise Gamma shape
  double d0 = 1e-5;       // noise Gamma rate
  double varsigma = 1e-3; // mean-vector prior precision
  int r = 5;
  int max_iters = 500;
  double tol = 1e-4;  // relative parameter change
};

struct LaplaceState {
  Matrix mu_P;                  // m x r
  std::vector<Matrix> sigma_P;  // m covariances, r x r each (rows differ)
  Matrix mu_t;                  // r x n score means
  Matrix sigma_t;               // r x r shared
  Vector mu_xbar;               // m
  double sigma_xbar = 0.0;      // scalar variance, isotropic posterior
  double e_theta = 1.0;         // noise precision mean
  Matrix e_eta;                 // m x r prior variance means
};

struct LaplaceModel {
  Matrix loading;
  Vector latent_scale;
  double noise_precision = 0.0;
  Vector mean_correction;
  int rank = 0;
  bool converged = false;
};

struct LaplaceTrace {
  std::vector<double> delta;  // relative parameter change per sweep
  int iterations = 0;
  bool converged = false;
};

LaplaceState init_laplace_state(const DataMatrix& X, const LaplaceHyper& hyper,
                                std::uint64_t seed);

/// One sweep P -> t -> xbar -> theta -> eta. The P-row covariance uses the
/// symmetric precision form (E[theta]*S_t + diag(E[eta])^{-1})^{-1}.
void sweep_laplace(LaplaceState& state, const Matrix& X,
                   const LaplaceHyper& hyper);

LaplaceModel fit_laplace(const DataMatrix& X, const LaplaceHyper& hyper,
                         std::uint64_t seed, LaplaceTrace* trace = nullptr);

Vector project(const LaplaceModel& model, const Vector& y);

/// E|Z| for Z ~ N(mu, var); never below |mu|.
double folded_normal_mean(double mu, double var);

/// Posterior mean of one eta entry: (varphi + sqrt(2*varphi)*E|P_ji|)/2.
double eta_mean(double varphi, double e_abs_p);

}  // namespace vbspca
