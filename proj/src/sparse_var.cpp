#include "vbspca/sparse_var.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "vbspca/errors.hpp"

namespace vbspca {

namespace {

constexpr double kCoordTol = 1e-8;
constexpr int kMaxCycles = 10000;

double soft_threshold(double x, double lambda) {
  if (x > lambda) return x - lambda;
  if (x < -lambda) return x + lambda;
  return 0.0;
}

/// Coordinate descent for one response column. gram = Q'Q, rhs = Q'z.
Vector lasso_column(const Matrix& gram, const Vector& rhs, double lambda) {
  const Index p = gram.rows();
  Vector w = Vector::Zero(p);
  Vector gram_w = Vector::Zero(p);  // gram * w, maintained incrementally
  for (int cycle = 0; cycle < kMaxCycles; ++cycle) {
    double max_change = 0.0;
    for (Index j = 0; j < p; ++j) {
      const double diag = gram(j, j);
      if (diag <= 0.0) {
        w(j) = 0.0;
        continue;
      }
      const double rho = rhs(j) - gram_w(j) + diag * w(j);
      const double updated = soft_threshold(rho, lambda) / diag;
      const double change = updated - w(j);
      if (change != 0.0) {
        gram_w += change * gram.col(j);
        w(j) = updated;
        max_change = std::max(max_change, std::abs(change));
      }
    }
    if (max_change < kCoordTol) break;
  }
  return w;
}

}  // namespace

LaggedDesign build_lagged(const Matrix& series, int tau) {
  const Index r = series.rows();
  const Index length = series.cols();
  if (tau < 1) throw InputError("lag order must be >= 1");
  if (length <= tau) {
    throw InputError("series length " + std::to_string(length) +
                     " must exceed lag order " + std::to_string(tau));
  }
  const Index rows = length - tau;
  LaggedDesign design;
  design.r = static_cast<int>(r);
  design.tau = tau;
  design.targets.resize(rows, r);
  design.regressors.resize(rows, r * tau);
  for (Index k = 0; k < rows; ++k) {
    const Index t = k + tau;  // target time index
    design.targets.row(k) = series.col(t).transpose();
    for (int d = 1; d <= tau; ++d) {
      design.regressors.block(k, (d - 1) * r, 1, r) =
          series.col(t - d).transpose();
    }
  }
  return design;
}

VarModel lasso_fit(const LaggedDesign& design, double lambda) {
  if (lambda < 0.0 || !std::isfinite(lambda)) {
    throw InputError("lambda must be finite and >= 0");
  }
  if (design.regressors.rows() < 1) throw InputError("empty lagged design");
  if (!design.regressors.allFinite() || !design.targets.allFinite()) {
    throw InputError("non-finite entries in lagged design");
  }
  const Matrix gram = design.regressors.transpose() * design.regressors;
  VarModel model;
  model.tau = design.tau;
  model.lambda = lambda;
  model.r = design.r;
  model.omega.resize(design.regressors.cols(), design.targets.cols());
  for (Index c = 0; c < design.targets.cols(); ++c) {
    const Vector rhs = design.regressors.transpose() * design.targets.col(c);
    model.omega.col(c) = lasso_column(gram, rhs, lambda);
  }
  return model;
}

Vector var_predict(const VarModel& model, const Matrix& history) {
  if (history.rows() != model.r || history.cols() != model.tau) {
    throw InputError("history must be r x tau = " + std::to_string(model.r) +
                     " x " + std::to_string(model.tau));
  }
  Vector prediction = Vector::Zero(model.r);
  for (int d = 0; d < model.tau; ++d) {
    prediction += model.omega.block(d * model.r, 0, model.r, model.r)
                      .transpose() *
                  history.col(d);
  }
  return prediction;
}

Matrix residual_acf(const Matrix& series, const VarModel& model, int max_lag) {
  const Index r = series.rows();
  const Index length = series.cols();
  const int tau = model.tau;
  if (length - tau <= max_lag) {
    throw InputError("series too short for requested ACF lags");
  }
  const Index n_resid = length - tau;
  Matrix residuals(r, n_resid);
  Matrix history(r, tau);
  for (Index k = tau; k < length; ++k) {
    for (int d = 1; d <= tau; ++d) history.col(d - 1) = series.col(k - d);
    residuals.col(k - tau) = series.col(k) - var_predict(model, history);
  }

  Matrix acf = Matrix::Zero(r, max_lag);
  for (Index c = 0; c < r; ++c) {
    const double mean = residuals.row(c).mean();
    const Eigen::ArrayXd centered = residuals.row(c).transpose().array() - mean;
    const double denom = centered.square().sum();
    if (denom <= 0.0) continue;  // flat residuals: ACF defined as zero
    for (int lag = 1; lag <= max_lag; ++lag) {
      const Index len = n_resid - lag;
      const double num =
          (centered.head(len) * centered.tail(len)).sum();
      acf(c, lag - 1) = num / denom;
    }
  }
  return acf;
}

double lasso_objective(const LaggedDesign& design, const Matrix& omega,
                       double lambda) {
  return 0.5 * (design.targets - design.regressors * omega).squaredNorm() +
         lambda * omega.cwiseAbs().sum();
}

double cv_lambda(const LaggedDesign& design, int folds, int grid_size) {
  const Index rows = design.regressors.rows();
  if (folds < 2 || rows < folds) throw InputError("not enough rows for CV");
  const double lambda_max =
      (design.regressors.transpose() * design.targets).cwiseAbs().maxCoeff();
  if (!(lambda_max > 0.0)) return 0.0;

  std::vector<double> grid(static_cast<std::size_t>(grid_size));
  const double log_lo = std::log(1e-4 * lambda_max);
  const double log_hi = std::log(lambda_max);
  for (int g = 0; g < grid_size; ++g) {
    grid[static_cast<std::size_t>(g)] =
        std::exp(log_lo + (log_hi - log_lo) * g /
                              std::max(1, grid_size - 1));
  }

  double best_lambda = grid.front();
  double best_err = std::numeric_limits<double>::infinity();
  for (double lambda : grid) {
    double err = 0.0;
    Index counted = 0;
    for (int f = 0; f < folds; ++f) {
      const Index lo = rows * f / folds;
      const Index hi = rows * (f + 1) / folds;
      const Index n_val = hi - lo;
      if (n_val == 0) continue;
      const Index n_train = rows - n_val;
      LaggedDesign train;
      train.r = design.r;
      train.tau = design.tau;
      train.targets.resize(n_train, design.targets.cols());
      train.regressors.resize(n_train, design.regressors.cols());
      train.targets << design.targets.topRows(lo),
          design.targets.bottomRows(rows - hi);
      train.regressors << design.regressors.topRows(lo),
          design.regressors.bottomRows(rows - hi);
      const VarModel fold_model = lasso_fit(train, lambda);
      err += (design.targets.middleRows(lo, n_val) -
              design.regressors.middleRows(lo, n_val) * fold_model.omega)
                 .squaredNorm();
      counted += n_val;
    }
    err /= static_cast<double>(counted);
    if (err < best_err) {
      best_err = err;
      best_lambda = lambda;
    }
  }
  return best_lambda;
}

int suggest_order(const Matrix& series, int max_order) {
  if (max_order < 1) throw InputError("max_order must be >= 1");
  const Index r = series.rows();
  int best_order = 1;
  double best_aic = std::numeric_limits<double>::infinity();
  for (int tau = 1; tau <= max_order; ++tau) {
    if (series.cols() <= tau + 1) break;
    const LaggedDesign design = build_lagged(series, tau);
    const VarModel model = lasso_fit(design, 0.0);
    const Index n_eff = design.targets.rows();
    const double rss =
        (design.targets - design.regressors * model.omega).squaredNorm();
    const double aic =
        static_cast<double>(n_eff * r) *
            std::log(std::max(rss / static_cast<double>(n_eff * r), 1e-300)) +
        2.0 * static_cast<double>(r * r * tau);
    if (aic < best_aic) {
      best_aic = aic;
      best_order = tau;
    }
  }
  return best_order;
}

}  // namespace vbspca
