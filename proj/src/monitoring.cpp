#include "vbspca/monitoring.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>

#include <json.hpp>

#include "vbspca/errors.hpp"

namespace vbspca {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

/// Score series for every sample: column i = loading' * y_i.
Matrix project_all(const Matrix& loading, const Matrix& values) {
  return loading.transpose() * values;
}

/// One-step predictions for indices lag..L-1 of a score series.
Matrix one_step_predictions(const Matrix& scores, const VarModel& var) {
  const Index r = scores.rows();
  const Index length = scores.cols();
  const int tau = var.tau;
  Matrix predictions(r, length - tau);
  Matrix history(r, tau);
  for (Index k = tau; k < length; ++k) {
    for (int d = 1; d <= tau; ++d) history.col(d - 1) = scores.col(k - d);
    predictions.col(k - tau) = var_predict(var, history);
  }
  return predictions;
}

IndexStats index_stats(const std::vector<bool>& alarms, int warmup,
                       Index first_fault, Index n) {
  IndexStats stats;
  Index normal_total = 0, normal_alarms = 0;
  Index fault_total = 0, fault_alarms = 0;
  for (Index i = warmup; i < n; ++i) {
    if (i < first_fault) {
      ++normal_total;
      if (alarms[static_cast<std::size_t>(i)]) ++normal_alarms;
    } else {
      ++fault_total;
      if (alarms[static_cast<std::size_t>(i)]) ++fault_alarms;
    }
  }
  stats.far = normal_total > 0
                  ? static_cast<double>(normal_alarms) /
                        static_cast<double>(normal_total)
                  : 0.0;
  stats.fdr = fault_total > 0
                  ? static_cast<double>(fault_alarms) /
                        static_cast<double>(fault_total)
                  : 0.0;
  stats.delay = -1;
  for (Index i = std::max<Index>(first_fault, warmup); i + 2 < n; ++i) {
    if (alarms[static_cast<std::size_t>(i)] &&
        alarms[static_cast<std::size_t>(i + 1)] &&
        alarms[static_cast<std::size_t>(i + 2)]) {
      stats.delay = static_cast<int>(i - first_fault);
      break;
    }
  }
  return stats;
}

}  // namespace

Kde1d Kde1d::fit(const std::vector<double>& samples) {
  if (samples.size() < 2) throw InputError("KDE needs at least 2 samples");
  Kde1d kde;
  kde.points = samples;
  const double n = static_cast<double>(samples.size());
  double mean = 0.0;
  for (double v : samples) mean += v;
  mean /= n;
  double ss = 0.0;
  for (double v : samples) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  kde.bandwidth = 1.06 * sd * std::pow(n, -0.2);
  if (!(kde.bandwidth > 0.0)) {
    // Degenerate training statistics (all equal): keep a sliver of width
    // so the quantile stays defined just above the common value.
    kde.bandwidth = 1e-8 * std::max(1.0, std::abs(mean));
  }
  return kde;
}

double Kde1d::pdf(double x) const {
  const double inv_h = 1.0 / bandwidth;
  const double norm = inv_h / std::sqrt(2.0 * std::numbers::pi) /
                      static_cast<double>(points.size());
  double sum = 0.0;
  for (double p : points) {
    const double z = (x - p) * inv_h;
    sum += std::exp(-0.5 * z * z);
  }
  return norm * sum;
}

double Kde1d::cdf(double x) const {
  const double inv = 1.0 / (bandwidth * std::numbers::sqrt2);
  double sum = 0.0;
  for (double p : points) {
    sum += 0.5 * (1.0 + std::erf((x - p) * inv));
  }
  return sum / static_cast<double>(points.size());
}

double Kde1d::quantile(double alpha) const {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw InputError("quantile level must lie in (0,1)");
  }
  const auto [mn, mx] = std::minmax_element(points.begin(), points.end());
  double lo = *mn - 8.0 * bandwidth;
  double hi = *mx + 8.0 * bandwidth;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (cdf(mid) >= alpha) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return 0.5 * (lo + hi);
}

MonitorProfile calibrate(const Matrix& loading, const VarModel& var,
                         const DataMatrix& X_train, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw InputError("alpha must lie in (0,1)");
  const Index length = X_train.samples();
  if (length <= var.tau + 30) {
    throw InputError("too few training samples for calibration");
  }
  if (loading.rows() != X_train.sensors()) {
    throw InputError("loading/data dimension mismatch");
  }

  const Matrix scores = project_all(loading, X_train.values);
  const Matrix predictions = one_step_predictions(scores, var);
  const Index n_pred = predictions.cols();

  MonitorProfile profile;
  profile.alpha = alpha;
  profile.lag = var.tau;
  profile.lambda_diag.resize(predictions.rows());
  for (Index c = 0; c < predictions.rows(); ++c) {
    const double mean = predictions.row(c).mean();
    const double variance = (predictions.row(c).array() - mean).square().sum() /
                            static_cast<double>(n_pred - 1);
    if (!(variance > 0.0)) {
      throw NumericError("zero-variance latent component " + std::to_string(c));
    }
    profile.lambda_diag(c) = 1.0 / variance;
  }

  std::vector<double> t2_stats(static_cast<std::size_t>(n_pred));
  std::vector<double> spe_stats(static_cast<std::size_t>(n_pred));
  for (Index k = 0; k < n_pred; ++k) {
    t2_stats[static_cast<std::size_t>(k)] =
        t2_statistic(predictions.col(k), profile);
    spe_stats[static_cast<std::size_t>(k)] =
        spe_statistic(X_train.values.col(k + var.tau), loading);
  }

  const Kde1d kde_t2 = Kde1d::fit(t2_stats);
  const Kde1d kde_spe = Kde1d::fit(spe_stats);
  profile.bandwidth_t2 = kde_t2.bandwidth;
  profile.bandwidth_spe = kde_spe.bandwidth;
  profile.t2_limit = kde_t2.quantile(alpha);
  profile.spe_limit = kde_spe.quantile(alpha);
  return profile;
}

double t2_statistic(const Vector& t_hat, const MonitorProfile& profile) {
  if (t_hat.size() != profile.lambda_diag.size()) {
    throw InputError("T2 dimension mismatch");
  }
  return (profile.lambda_diag.array() * t_hat.array().square()).sum();
}

double spe_statistic(const Vector& y, const Matrix& loading) {
  if (y.size() != loading.rows()) throw InputError("SPE dimension mismatch");
  const Vector scores = loading.transpose() * y;
  return (y - loading * scores).squaredNorm();
}

DetectionResult detect(const MonitorProfile& profile, const Matrix& loading,
                       const VarModel& var, const DataMatrix& Y_test,
                       int onset) {
  const Index n = Y_test.samples();
  if (onset < 1 || onset > n) {
    throw InputError("onset out of range: " + std::to_string(onset));
  }
  const int tau = var.tau;
  if (n <= tau) throw InputError("test window shorter than the lag order");

  const Matrix scores = project_all(loading, Y_test.values);
  DetectionResult result;
  result.onset = onset;
  result.warmup = tau;
  result.t2_series.assign(static_cast<std::size_t>(n), kNan);
  result.spe_series.assign(static_cast<std::size_t>(n), kNan);
  result.t2_alarms.assign(static_cast<std::size_t>(n), false);
  result.spe_alarms.assign(static_cast<std::size_t>(n), false);

  Matrix history(scores.rows(), tau);
  for (Index k = tau; k < n; ++k) {
    for (int d = 1; d <= tau; ++d) history.col(d - 1) = scores.col(k - d);
    const Vector prediction = var_predict(var, history);
    const double t2 = t2_statistic(prediction, profile);
    const double spe = spe_statistic(Y_test.values.col(k), loading);
    result.t2_series[static_cast<std::size_t>(k)] = t2;
    result.spe_series[static_cast<std::size_t>(k)] = spe;
    result.t2_alarms[static_cast<std::size_t>(k)] = t2 > profile.t2_limit;
    result.spe_alarms[static_cast<std::size_t>(k)] = spe > profile.spe_limit;
  }

  const Index first_fault = onset - 1;
  result.t2 = index_stats(result.t2_alarms, tau, first_fault, n);
  result.spe = index_stats(result.spe_alarms, tau, first_fault, n);
  // Each index is its own detector: report the worst false alarm rate and
  // the best detection behaviour across the two.
  result.far = std::max(result.t2.far, result.spe.far);
  result.fdr = std::max(result.t2.fdr, result.spe.fdr);
  if (result.t2.delay < 0) {
    result.detection_delay = result.spe.delay;
  } else if (result.spe.delay < 0) {
    result.detection_delay = result.t2.delay;
  } else {
    result.detection_delay = std::min(result.t2.delay, result.spe.delay);
  }
  return result;
}

void write_detection_csv(const DetectionResult& result,
                         const MonitorProfile& profile,
                         const std::string& path) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw InputError("cannot write " + tmp);
    out << "sample_index,t2,spe,t2_limit,spe_limit,t2_alarm,spe_alarm,warmup\n";
    char buf[160];
    for (std::size_t i = 0; i < result.t2_series.size(); ++i) {
      const bool warm = static_cast<int>(i) < result.warmup;
      if (warm) {
        std::snprintf(buf, sizeof(buf), "%zu,,,%.17g,%.17g,0,0,1\n", i + 1,
                      profile.t2_limit, profile.spe_limit);
      } else {
        std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g,%.17g,%d,%d,0\n",
                      i + 1, result.t2_series[i], result.spe_series[i],
                      profile.t2_limit, profile.spe_limit,
                      result.t2_alarms[i] ? 1 : 0, result.spe_alarms[i] ? 1 : 0);
      }
      out << buf;
    }
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    throw InputError("cannot rename " + tmp + " to " + path);
  }
}

void write_detection_summary(const DetectionResult& result,
                             const MonitorProfile& profile,
                             const std::string& path) {
  nlohmann::json doc;
  doc["far"] = result.far;
  doc["fdr"] = result.fdr;
  doc["detection_delay"] = result.detection_delay;
  doc["t2"] = {{"far", result.t2.far},
               {"fdr", result.t2.fdr},
               {"delay", result.t2.delay},
               {"limit", profile.t2_limit}};
  doc["spe"] = {{"far", result.spe.far},
                {"fdr", result.spe.fdr},
                {"delay", result.spe.delay},
                {"limit", profile.spe_limit}};
  doc["onset"] = result.onset;
  doc["warmup"] = result.warmup;
  doc["alpha"] = profile.alpha;
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw InputError("cannot write " + tmp);
    out << doc.dump(2) << '\n';
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    throw InputError("cannot rename " + tmp + " to " + path);
  }
}

}  // namespace vbspca
