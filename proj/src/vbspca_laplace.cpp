#include "vbspca/vbspca_laplace.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "vbspca/errors.hpp"
#include "vbspca/vbspca_gaussian.hpp"  // orthonormalize_loading

namespace vbspca {

namespace {

Matrix invert_spd(const Matrix& precision, const char* label) {
  const Eigen::LLT<Matrix> llt(precision);
  if (llt.info() != Eigen::Success) {
    throw NumericError(std::string(label) +
                       " precision matrix is not positive definite");
  }
  Matrix cov = llt.solve(Matrix::Identity(precision.rows(), precision.cols()));
  cov = ((cov + cov.transpose()) / 2.0).eval();
  return cov;
}

}  // namespace

double folded_normal_mean(double mu, double var) {
  if (var <= 0.0) return std::abs(mu);
  const double sd = std::sqrt(var);
  const double z = mu / (sd * std::numbers::sqrt2);
  return sd * std::sqrt(2.0 / std::numbers::pi) * std::exp(-mu * mu / (2.0 * var)) +
         mu * std::erf(z);
}

double eta_mean(double varphi, double e_abs_p) {
  return 0.5 * (varphi + std::sqrt(2.0 * varphi) * e_abs_p);
}

LaplaceState init_laplace_state(const DataMatrix& X, const LaplaceHyper& hyper,
                                std::uint64_t /*seed*/) {
  const Index m = X.sensors();
  const Index n = X.samples();
  if (hyper.r < 1 || hyper.r > std::min(m, n)) {
    throw InputError("rank must lie in [1, min(m,n)]");
  }
  if (!(hyper.varphi > 0.0 && hyper.c0 > 0.0 && hyper.d0 > 0.0 &&
        hyper.varsigma > 0.0)) {
    throw InputError("Laplace hyperparameters must be strictly positive");
  }
  const double mean = X.values.mean();
  const double var = X.values.squaredNorm() / static_cast<double>(m * n) -
                     mean * mean;
  if (!(var > 0.0)) {
    throw NumericError("degenerate input: data matrix has zero variance");
  }

  const int r = hyper.r;
  Eigen::BDCSVD<Matrix> svd(X.values, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector scale = svd.singularValues().head(r).cwiseSqrt();

  LaplaceState state;
  state.mu_P = svd.matrixU().leftCols(r) * scale.asDiagonal();
  Matrix v_scaled = svd.matrixV().leftCols(r) * scale.asDiagonal();
  for (Index c = 0; c < r; ++c) {
    Index peak = 0;
    state.mu_P.col(c).cwiseAbs().maxCoeff(&peak);
    if (state.mu_P(peak, c) < 0.0) {
      state.mu_P.col(c) = -state.mu_P.col(c);
      v_scaled.col(c) = -v_scaled.col(c);
    }
  }
  state.mu_t = v_scaled.transpose();
  state.sigma_P.assign(static_cast<std::size_t>(m),
                       1e-2 * Matrix::Identity(r, r));
  state.sigma_t = 1e-2 * Matrix::Identity(r, r);
  state.mu_xbar = Vector::Zero(m);
  state.sigma_xbar = 1e-2;
  state.e_theta = 1.0 / var;
  state.e_eta = Matrix::Constant(m, r, hyper.varphi);
  return state;
}

void sweep_laplace(LaplaceState& state, const Matrix& X,
                   const LaplaceHyper& hyper) {
  const Index m = X.rows();
  const Index n = X.cols();
  const Index r = state.mu_P.cols();

  // q(P), row by row: the score Gram is shared, the eta reweighting is not.
  const Matrix score_gram = state.mu_t * state.mu_t.transpose() +
                            static_cast<double>(n) * state.sigma_t;
  const Matrix centered = X.colwise() - state.mu_xbar;  // m x n
  const Matrix cross = state.mu_t * centered.transpose();  // r x m
  for (Index j = 0; j < m; ++j) {
    Matrix precision = state.e_theta * score_gram;
    precision.diagonal() += state.e_eta.row(j).cwiseInverse();
    state.sigma_P[static_cast<std::size_t>(j)] = invert_spd(precision, "loading row");
    state.mu_P.row(j) = (state.e_theta *
                         state.sigma_P[static_cast<std::size_t>(j)] * cross.col(j))
                            .transpose();
  }

  // q(t): shared covariance, unit latent prior.
  Matrix loading_gram = state.mu_P.transpose() * state.mu_P;
  for (const Matrix& cov : state.sigma_P) loading_gram += cov;
  Matrix t_precision = state.e_theta * loading_gram;
  t_precision.diagonal().array() += 1.0;
  state.sigma_t = invert_spd(t_precision, "score");
  state.mu_t = state.e_theta * state.sigma_t * state.mu_P.transpose() * centered;

  // q(xbar): isotropic Gaussian.
  state.sigma_xbar = 1.0 / (static_cast<double>(n) * state.e_theta + hyper.varsigma);
  state.mu_xbar = state.e_theta * state.sigma_xbar *
                  (X - state.mu_P * state.mu_t).rowwise().sum();

  // q(theta): Gamma with the exact expected residual.
  Matrix sigma_p_sum = Matrix::Zero(r, r);
  for (const Matrix& cov : state.sigma_P) sigma_p_sum += cov;
  const Matrix mean_gram = state.mu_P.transpose() * state.mu_P;
  const Matrix e_pp = mean_gram + sigma_p_sum;
  const double mean_resid =
      ((X.colwise() - state.mu_xbar) - state.mu_P * state.mu_t).squaredNorm();
  const double resid_sq =
      mean_resid + (sigma_p_sum * (state.mu_t * state.mu_t.transpose())).trace() +
      static_cast<double>(n) * (e_pp * state.sigma_t).trace() +
      static_cast<double>(n * m) * state.sigma_xbar;
  const double c = hyper.c0 + static_cast<double>(n * m) / 2.0;
  const double d = hyper.d0 + 0.5 * resid_sq;
  if (!(d > 0.0) || !std::isfinite(d)) {
    throw NumericError("noise rate is not positive: " + std::to_string(d));
  }
  state.e_theta = c / d;

  // q(eta): only the mean is needed downstream; E|P_ji| is folded-normal.
  for (Index j = 0; j < m; ++j) {
    const Matrix& cov = state.sigma_P[static_cast<std::size_t>(j)];
    for (Index cix = 0; cix < r; ++cix) {
      const double e_abs = folded_normal_mean(state.mu_P(j, cix), cov(cix, cix));
      state.e_eta(j, cix) = eta_mean(hyper.varphi, e_abs);
    }
  }
}

LaplaceModel fit_laplace(const DataMatrix& X, const LaplaceHyper& hyper,
                         std::uint64_t seed, LaplaceTrace* trace) {
  LaplaceState state = init_laplace_state(X, hyper, seed);
  const Matrix& values = X.values;

  bool converged = false;
  int iterations = 0;
  for (int it = 0; it < hyper.max_iters; ++it) {
    const double prev_p_norm = state.mu_P.norm();
    const double prev_t_norm = state.mu_t.norm();
    sweep_laplace(state, values, hyper);
    iterations = it + 1;
    const double dp = std::abs(state.mu_P.norm() - prev_p_norm) /
                      std::max(prev_p_norm, 1e-12);
    const double dt = std::abs(state.mu_t.norm() - prev_t_norm) /
                      std::max(prev_t_norm, 1e-12);
    if (trace) trace->delta.push_back(std::max(dp, dt));
    if (dp < hyper.tol && dt < hyper.tol) {
      converged = true;
      break;
    }
  }
  if (trace) {
    trace->iterations = iterations;
    trace->converged = converged;
  }

  LaplaceModel model;
  model.loading = orthonormalize_loading(state.mu_P);
  model.rank = static_cast<int>(state.mu_P.cols());
  model.latent_scale.resize(model.rank);
  for (Index c = 0; c < model.rank; ++c) {
    const auto row = state.mu_t.row(c);
    const double mean = row.mean();
    model.latent_scale(c) = (row.array() - mean).square().sum() /
                            static_cast<double>(row.size() - 1);
  }
  model.noise_precision = state.e_theta;
  model.mean_correction = state.mu_xbar;
  model.converged = converged;
  return model;
}

Vector project(const LaplaceModel& model, const Vector& y) {
  if (y.size() != model.loading.rows()) {
    throw InputError("projection dimension mismatch: expected " +
                     std::to_string(model.loading.rows()) + ", got " +
                     std::to_string(y.size()));
  }
  return model.loading.transpose() * y;
}

}  // namespace vbspca
