#pragma once

#include "vbspca/types.hpp"

namespace vbspca {

// One-step-ahead dynamics of the latent scores: t_k ~ sum_d omega_d' t_{k-d},
// coefficients fit column-wise by L1-penalized coordinate descent.

struct VarModel {
  Matrix omega;  // (r*tau) x r, lag-1 block on top
  int tau = 1;
  double lambda = 0.0;
  int r = 0;
};

struct LaggedDesign {
  Matrix targets;     // (L-tau) x r, row k is the score at time tau+k
  Matrix regressors;  // (L-tau) x (r*tau), row k = [t_{k-1}', ..., t_{k-tau}']
  int r = 0;
  int tau = 0;
};

/// Stacks a score series (component per row, time per column) into the
/// regression form. Requires L > tau >= 1.
LaggedDesign build_lagged(const Matrix& series, int tau);

/// argmin_w 0.5*||Z - Q w||_F^2 + lambda*||w||_1 by cyclic coordinate
/// descent with soft thresholding; columns are independent problems.
VarModel lasso_fit(const LaggedDesign& design, double lambda);

/// Prediction from a history matrix (r x tau, most recent lag first).
Vector var_predict(const VarModel& model, const Matrix& history);

/// Sample autocorrelation of one-step prediction residuals, one row per
/// component, lags 1..max_lag. Zero-variance residuals yield zeros.
Matrix residual_acf(const Matrix& series, const VarModel& model, int max_lag);

/// Blocked chronological cross-validation over a log grid of
/// grid_size values spanning [1e-4, 1] * ||Q'Z||_inf.
double cv_lambda(const LaggedDesign& design, int folds = 5, int grid_size = 20);

/// lasso_fit at the given penalty (CV-chosen when absent), halving lambda
/// while any coefficient column is entirely zero: a monitored component
/// needs a non-constant prediction series for its control limit.
VarModel fit_monitored_var(const LaggedDesign& design, double lambda,
                           bool lambda_fixed);

/// Smallest-AIC order among 1..max_order, least-squares fits.
int suggest_order(const Matrix& series, int max_order);

/// 0.5*||Z - Q w||_F^2 + lambda*||w||_1 for a candidate coefficient matrix.
double lasso_objective(const LaggedDesign& design, const Matrix& omega,
                       double lambda);

}  // namespace vbspca
