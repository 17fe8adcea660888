#include "vbspca/vbspca_gaussian.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "vbspca/errors.hpp"
#include "vbspca/math_util.hpp"

namespace vbspca {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;
constexpr double kLog2PiE = 2.8378770664093454836;

struct ActiveView {
  std::vector<int> idx;
  Matrix mu_P;     // m x ka
  Matrix sigma_P;  // ka x ka
  Matrix mu_T;     // n x ka
  Matrix sigma_T;  // ka x ka
  Vector e_gamma;  // ka
};

ActiveView extract_active(const GaussianState& state) {
  ActiveView view;
  view.idx = state.active_indices();
  view.mu_P = state.mu_P(Eigen::all, view.idx);
  view.sigma_P = state.sigma_P(view.idx, view.idx);
  view.mu_T = state.mu_T(Eigen::all, view.idx);
  view.sigma_T = state.sigma_T(view.idx, view.idx);
  view.e_gamma = state.e_gamma(view.idx);
  return view;
}

void scatter_covariance(Matrix& full, const Matrix& block,
                        const std::vector<int>& idx, const Vector& e_gamma,
                        const std::vector<bool>& active) {
  full.setZero();
  full(idx, idx) = block;
  for (Index i = 0; i < full.rows(); ++i) {
    if (!active[static_cast<std::size_t>(i)]) full(i, i) = 1.0 / e_gamma(i);
  }
}

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

double log_det_spd(const Matrix& mat, const char* label) {
  const Eigen::LLT<Matrix> llt(mat);
  if (llt.info() != Eigen::Success) {
    throw NumericError(std::string(label) + " covariance is not positive definite");
  }
  return 2.0 * Matrix(llt.matrixL()).diagonal().array().log().sum();
}

/// E||X - P T' - Xbar||_F^2 under the factorized posterior.
double expected_residual_sq(const Matrix& X, const ActiveView& v,
                            const Matrix& mu_xbar, const Matrix& sigma_xbar) {
  const Index m = X.rows();
  const Index n = X.cols();
  const double mean_term =
      (X - v.mu_P * v.mu_T.transpose() - mu_xbar).squaredNorm();
  const Matrix gram_P = v.mu_P.transpose() * v.mu_P;
  const Matrix gram_T = v.mu_T.transpose() * v.mu_T;
  return mean_term + static_cast<double>(n) * (gram_P * v.sigma_T).trace() +
         static_cast<double>(m) * (gram_T * v.sigma_P).trace() +
         static_cast<double>(m * n) * (v.sigma_P * v.sigma_T).trace() +
         sigma_xbar.sum();
}

}  // namespace

int GaussianState::active_count() const {
  int count = 0;
  for (bool a : active) count += a ? 1 : 0;
  return count;
}

std::vector<int> GaussianState::active_indices() const {
  std::vector<int> idx;
  for (std::size_t i = 0; i < active.size(); ++i) {
    if (active[i]) idx.push_back(static_cast<int>(i));
  }
  return idx;
}

Matrix posterior_row_covariance(const Matrix& gram, double noise_prec,
                                const Vector& prior_prec) {
  Matrix precision = noise_prec * gram;
  precision.diagonal() += prior_prec;
  return invert_spd(precision, "row");
}

GammaPosterior gamma_update(double a0, double b0, Index m, Index n,
                            double e_pp, double e_tt) {
  GammaPosterior post;
  post.shape = a0 + static_cast<double>(m + n) / 2.0;
  post.rate = b0 + (e_pp + e_tt) / 2.0;
  post.mean = post.shape / post.rate;
  return post;
}

Matrix orthonormalize_loading(const Matrix& columns) {
  const Index m = columns.rows();
  const Index r = columns.cols();
  const Eigen::HouseholderQR<Matrix> qr(columns);
  Matrix q = qr.householderQ() * Matrix::Identity(m, r);
  for (Index c = 0; c < r; ++c) {
    Index peak = 0;
    q.col(c).cwiseAbs().maxCoeff(&peak);
    if (q(peak, c) < 0.0) q.col(c) = -q.col(c);
  }
  return q;
}

GaussianState init_state(const DataMatrix& X, const GaussianHyper& hyper,
                         std::uint64_t /*seed*/) {
  const Index m = X.sensors();
  const Index n = X.samples();
  if (hyper.r_max < 1 || hyper.r_max > std::min(m, n)) {
    throw InputError("r_max must lie in [1, min(m,n)]");
  }
  const double mean = X.values.mean();
  const double var = X.values.squaredNorm() / static_cast<double>(m * n) -
                     mean * mean;
  if (!(var > 0.0)) {
    throw NumericError("degenerate input: data matrix has zero variance");
  }

  const int k = hyper.r_max;
  Eigen::BDCSVD<Matrix> svd(X.values, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector scale = svd.singularValues().head(k).cwiseSqrt();

  GaussianState state;
  state.mu_P = svd.matrixU().leftCols(k) * scale.asDiagonal();
  state.mu_T = svd.matrixV().leftCols(k) * scale.asDiagonal();
  for (Index c = 0; c < k; ++c) {
    Index peak = 0;
    state.mu_P.col(c).cwiseAbs().maxCoeff(&peak);
    if (state.mu_P(peak, c) < 0.0) {
      state.mu_P.col(c) = -state.mu_P.col(c);
      state.mu_T.col(c) = -state.mu_T.col(c);
    }
  }
  state.sigma_P = 1e-2 * Matrix::Identity(k, k);
  state.sigma_T = 1e-2 * Matrix::Identity(k, k);
  state.mu_xbar = Matrix::Zero(m, n);
  // The offset channel starts locked (huge precision, matching tiny
  // variance). On standardized data the offsets belong at zero; started
  // loose, the improper per-entry prior lets Xbar swallow the noise floor
  // entry by entry and the noise precision diverges instead of calibrating.
  state.sigma_xbar = Matrix::Constant(m, n, 1e-8);
  state.e_gamma = Vector::Ones(k);
  state.e_alpha = Matrix::Constant(m, n, 1e8);
  state.e_beta = 1.0 / var;
  state.active.assign(static_cast<std::size_t>(k), true);
  return state;
}

void sweep_gaussian(GaussianState& state, const Matrix& X,
                    const GaussianHyper& hyper) {
  const Index m = X.rows();
  const Index n = X.cols();
  ActiveView v = extract_active(state);
  const Index ka = static_cast<Index>(v.idx.size());
  if (ka == 0) throw NumericError("sweep on fully pruned state");

  const Matrix residual = X - state.mu_xbar;

  // q(P): shared row covariance, means via the T design.
  Matrix e_tt = v.mu_T.transpose() * v.mu_T +
                static_cast<double>(n) * v.sigma_T;
  v.sigma_P = posterior_row_covariance(e_tt, state.e_beta, v.e_gamma);
  v.mu_P = state.e_beta * residual * v.mu_T * v.sigma_P;

  // q(T): same structure with P as the design.
  Matrix e_pp = v.mu_P.transpose() * v.mu_P +
                static_cast<double>(m) * v.sigma_P;
  v.sigma_T = posterior_row_covariance(e_pp, state.e_beta, v.e_gamma);
  v.mu_T = state.e_beta * residual.transpose() * v.mu_P * v.sigma_T;

  // q(Xbar): entrywise Gaussian, precision E[beta] + E[alpha].
  const Matrix low_rank = v.mu_P * v.mu_T.transpose();
  const Eigen::ArrayXXd denom = state.e_beta + state.e_alpha.array();
  state.mu_xbar = (state.e_beta / denom) * (X - low_rank).array();
  state.sigma_xbar = denom.inverse();

  // q(gamma): component ARD precisions.
  for (Index c = 0; c < ka; ++c) {
    const double pp = v.mu_P.col(c).squaredNorm() +
                      static_cast<double>(m) * v.sigma_P(c, c);
    const double tt = v.mu_T.col(c).squaredNorm() +
                      static_cast<double>(n) * v.sigma_T(c, c);
    v.e_gamma(c) = gamma_update(hyper.a0, hyper.b0, m, n, pp, tt).mean;
  }

  // q(alpha): Jeffreys result, precision = 1 / E[Xbar_ji^2].
  state.e_alpha =
      (state.mu_xbar.array().square() + state.sigma_xbar.array()).inverse();

  // q(beta): global noise precision from the trace-corrected residual.
  const double resid_sq =
      expected_residual_sq(X, v, state.mu_xbar, state.sigma_xbar);
  if (!(resid_sq > 0.0) || !std::isfinite(resid_sq)) {
    throw NumericError("expected residual is not positive: " +
                       std::to_string(resid_sq));
  }
  state.e_beta = static_cast<double>(m * n) / resid_sq;

  state.mu_P(Eigen::all, v.idx) = v.mu_P;
  state.mu_T(Eigen::all, v.idx) = v.mu_T;
  state.e_gamma(v.idx) = v.e_gamma;
  scatter_covariance(state.sigma_P, v.sigma_P, v.idx, state.e_gamma, state.active);
  scatter_covariance(state.sigma_T, v.sigma_T, v.idx, state.e_gamma, state.active);
}

double compute_elbo(const GaussianState& state, const Matrix& X,
                    const GaussianHyper& hyper) {
  const Index m = X.rows();
  const Index n = X.cols();
  const double mn = static_cast<double>(m * n);
  const ActiveView v = extract_active(state);
  const Index ka = static_cast<Index>(v.idx.size());

  // Implied Gamma posteriors: shapes are fixed by the update equations,
  // rates recovered from the stored means.
  const double a_gamma = hyper.a0 + static_cast<double>(m + n) / 2.0;
  const double a_beta = mn / 2.0;
  const double b_beta = a_beta / state.e_beta;
  const double e_log_beta = detail::digamma(a_beta) - std::log(b_beta);

  const double resid_sq =
      expected_residual_sq(X, v, state.mu_xbar, state.sigma_xbar);

  double elbo = 0.0;
  // Likelihood.
  elbo += -0.5 * mn * kLog2Pi + 0.5 * mn * e_log_beta -
          0.5 * state.e_beta * resid_sq;

  // Column priors and ARD terms.
  for (Index c = 0; c < ka; ++c) {
    const double g = v.e_gamma(c);
    const double b_gamma = a_gamma / g;
    const double e_log_gamma = detail::digamma(a_gamma) - std::log(b_gamma);
    const double pp = v.mu_P.col(c).squaredNorm() +
                      static_cast<double>(m) * v.sigma_P(c, c);
    const double tt = v.mu_T.col(c).squaredNorm() +
                      static_cast<double>(n) * v.sigma_T(c, c);
    elbo += 0.5 * static_cast<double>(m) * (e_log_gamma - kLog2Pi) -
            0.5 * g * pp;
    elbo += 0.5 * static_cast<double>(n) * (e_log_gamma - kLog2Pi) -
            0.5 * g * tt;
    elbo += hyper.a0 * std::log(hyper.b0) - std::lgamma(hyper.a0) +
            (hyper.a0 - 1.0) * e_log_gamma - hyper.b0 * g;
    elbo += detail::gamma_entropy(a_gamma, b_gamma);
  }

  // Offset prior, Jeffreys hyperpriors, and entropies (entrywise).
  const Eigen::ArrayXXd second_moment =
      state.mu_xbar.array().square() + state.sigma_xbar.array();
  const Eigen::ArrayXXd b_alpha = 0.5 / state.e_alpha.array();
  const double psi_half = detail::digamma(0.5);
  const Eigen::ArrayXXd e_log_alpha = psi_half - b_alpha.log();
  elbo += (0.5 * e_log_alpha - 0.5 * kLog2Pi -
           0.5 * state.e_alpha.array() * second_moment)
              .sum();                 // ln p(Xbar | alpha)
  elbo += -e_log_alpha.sum();         // ln p(alpha)
  elbo += -e_log_beta;                // ln p(beta)
  // Gamma(1/2, b) entropies, only the rate varies per entry.
  const double half_entropy_const =
      0.5 + std::lgamma(0.5) + 0.5 * psi_half;
  elbo += (half_entropy_const - b_alpha.log()).sum();
  elbo += detail::gamma_entropy(a_beta, b_beta);

  // Gaussian entropies.
  elbo += 0.5 * static_cast<double>(m * ka) * kLog2PiE +
          0.5 * static_cast<double>(m) * log_det_spd(v.sigma_P, "P");
  elbo += 0.5 * static_cast<double>(n * ka) * kLog2PiE +
          0.5 * static_cast<double>(n) * log_det_spd(v.sigma_T, "T");
  elbo += 0.5 * (kLog2PiE + state.sigma_xbar.array().log()).sum();

  if (!std::isfinite(elbo)) {
    throw NumericError(
        "non-finite ELBO (residual=" + std::to_string(resid_sq) +
        ", beta=" + std::to_string(state.e_beta) + ")");
  }
  return elbo;
}

int prune(GaussianState& state, const GaussianHyper& hyper) {
  int removed = 0;
  for (std::size_t i = 0; i < state.active.size(); ++i) {
    const Index c = static_cast<Index>(i);
    if (state.active[i] && state.e_gamma(c) > hyper.prune_threshold) {
      state.active[i] = false;
      state.mu_P.col(c).setZero();
      state.mu_T.col(c).setZero();
      state.sigma_P.row(c).setZero();
      state.sigma_P.col(c).setZero();
      state.sigma_P(c, c) = 1.0 / state.e_gamma(c);
      state.sigma_T.row(c).setZero();
      state.sigma_T.col(c).setZero();
      state.sigma_T(c, c) = 1.0 / state.e_gamma(c);
      ++removed;
    }
  }
  if (state.active_count() == 0) {
    throw NumericError("all components pruned: degenerate fit");
  }
  return removed;
}

GaussianModel fit_gaussian(const DataMatrix& X, const GaussianHyper& hyper,
                           std::uint64_t seed, FitTrace* trace) {
  GaussianState state = init_state(X, hyper, seed);
  const Matrix& values = X.values;

  double elbo_prev = compute_elbo(state, values, hyper);
  bool converged = false;
  int iterations = 0;
  for (int it = 0; it < hyper.max_iters; ++it) {
    sweep_gaussian(state, values, hyper);
    const double elbo = compute_elbo(state, values, hyper);
    const int removed = prune(state, hyper);
    iterations = it + 1;
    if (trace) {
      trace->elbo.push_back(elbo);
      trace->active.push_back(state.active_count());
    }
    const double rel = std::abs(elbo - elbo_prev) /
                       std::max(1.0, std::abs(elbo_prev));
    if (removed == 0 && rel < hyper.tol) {
      converged = true;
      break;
    }
    // A prune changes the model, so restart the convergence baseline.
    elbo_prev = removed > 0 ? compute_elbo(state, values, hyper) : elbo;
  }
  if (trace) {
    trace->iterations = iterations;
    trace->converged = converged;
  }

  const std::vector<int> act = state.active_indices();
  GaussianModel model;
  model.loading = orthonormalize_loading(state.mu_P(Eigen::all, act));
  model.rank = static_cast<int>(act.size());
  model.latent_scale.resize(model.rank);
  for (std::size_t c = 0; c < act.size(); ++c) {
    const auto col = state.mu_T.col(act[c]);
    const double mean = col.mean();
    model.latent_scale(static_cast<Index>(c)) =
        (col.array() - mean).square().sum() /
        static_cast<double>(col.size() - 1);
  }
  model.noise_precision = state.e_beta;
  model.mean_correction = state.mu_xbar.rowwise().mean();
  model.converged = converged;
  return model;
}

Vector project(const GaussianModel& model, const Vector& y) {
  if (y.size() != model.loading.rows()) {
    throw InputError("projection dimension mismatch: expected " +
                     std::to_string(model.loading.rows()) + ", got " +
                     std::to_string(y.size()));
  }
  return model.loading.transpose() * y;
}

}  // namespace vbspca
