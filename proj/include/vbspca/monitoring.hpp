#pragma once

#include <string>
#include <vector>

#include "vbspca/core_data.hpp"
#include "vbspca/sparse_var.hpp"
#include "vbspca/types.hpp"

namespace vbspca {

// Gaussian-kernel density with Silverman bandwidth; the quantile is the
// alarm limit at a chosen confidence level.
struct Kde1d {
  std::vector<double> points;
  double bandwidth = 0.0;

  static Kde1d fit(const std::vector<double>& samples);
  double pdf(double x) const;
  double cdf(double x) const;
  /// Smallest v with cdf(v) >= alpha, by bisection.
  double quantile(double alpha) const;
};

struct MonitorProfile {
  Vector lambda_diag;  // inverse variances of the training predictions
  double t2_limit = 0.0;
  double spe_limit = 0.0;
  double alpha = 0.95;
  double bandwidth_t2 = 0.0;
  double bandwidth_spe = 0.0;
  int lag = 1;  // VAR order; samples with index < lag have no statistic
};

struct IndexStats {
  double far = 0.0;
  double fdr = 0.0;
  int delay = -1;  // -1 when never detected by the 3-in-a-row rule
};

struct DetectionResult {
  std::vector<double> t2_series;  // NaN during warm-up
  std::vector<double> spe_series;
  std::vector<bool> t2_alarms;
  std::vector<bool> spe_alarms;
  double far = 0.0;          // worst per-index false alarm rate
  double fdr = 0.0;          // best per-index detection rate
  int detection_delay = -1;  // earliest per-index delay
  IndexStats t2;
  IndexStats spe;
  int onset = 0;    // 1-based first faulty sample
  int warmup = 0;   // samples without a statistic
};

/// Runs the one-step predictor over the training window, sets the T2
/// weighting to inverse prediction variances, and places both limits at
/// the alpha-quantile of the KDE fitted to the training statistics.
MonitorProfile calibrate(const Matrix& loading, const VarModel& var,
                         const DataMatrix& X_train, double alpha);

/// sum_j lambda_j * t_hat_j^2.
double t2_statistic(const Vector& t_hat, const MonitorProfile& profile);

/// ||(I - P P') y||^2 for an orthonormal loading.
double spe_statistic(const Vector& y, const Matrix& loading);

/// Per-sample statistics and alarms over a standardized test window.
/// onset is 1-based; samples before it feed the false alarm rate, samples
/// from it on feed the detection rate.
DetectionResult detect(const MonitorProfile& profile, const Matrix& loading,
                       const VarModel& var, const DataMatrix& Y_test,
                       int onset);

void write_detection_csv(const DetectionResult& result,
                         const MonitorProfile& profile,
                         const std::string& path);
void write_detection_summary(const DetectionResult& result,
                             const MonitorProfile& profile,
                             const std::string& path);

}  // namespace vbspca
