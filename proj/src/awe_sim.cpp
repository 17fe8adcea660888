#include "vbspca/awe_sim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "vbspca/errors.hpp"
#include "vbspca/rng.hpp"

namespace vbspca {

namespace {

Matrix companion_matrix(const std::vector<Matrix>& coeffs, int r) {
  const int p = static_cast<int>(coeffs.size());
  Matrix comp = Matrix::Zero(r * p, r * p);
  for (int d = 0; d < p; ++d) {
    comp.block(0, d * r, r, r) = coeffs[static_cast<std::size_t>(d)];
  }
  if (p > 1) {
    comp.block(r, 0, r * (p - 1), r * (p - 1)) =
        Matrix::Identity(r * (p - 1), r * (p - 1));
  }
  return comp;
}

double spectral_radius(const Matrix& mat) {
  const Eigen::EigenSolver<Matrix> solver(mat, /*computeEigenvectors=*/false);
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

Vector per_sensor_std(const Matrix& values) {
  const Index m = values.rows();
  const Index n = values.cols();
  Vector out(m);
  for (Index j = 0; j < m; ++j) {
    const double mean = values.row(j).mean();
    out(j) = std::sqrt((values.row(j).array() - mean).square().sum() /
                       static_cast<double>(n - 1));
  }
  return out;
}

}  // namespace

FaultKind fault_kind_from_string(const std::string& name) {
  if (name == "bias") return FaultKind::Bias;
  if (name == "drift") return FaultKind::Drift;
  if (name == "variance_burst") return FaultKind::VarianceBurst;
  if (name == "level_swing") return FaultKind::LevelSwing;
  throw InputError("unknown fault kind: " + name);
}

std::string to_string(FaultKind kind) {
  switch (kind) {
    case FaultKind::Bias: return "bias";
    case FaultKind::Drift: return "drift";
    case FaultKind::VarianceBurst: return "variance_burst";
    case FaultKind::LevelSwing: return "level_swing";
  }
  return "bias";
}

std::vector<std::string> sensor_tags(int m) {
  std::vector<std::string> tags;
  tags.reserve(static_cast<std::size_t>(m));
  for (int j = 1; j <= m; ++j) {
    if (j <= 10) {
      tags.push_back("CV(" + std::to_string(j) + ")");
    } else {
      tags.push_back("PV(" + std::to_string(j - 10) + ")");
    }
  }
  return tags;
}

DataMatrix simulate_normal(const ProcessConfig& cfg, int n) {
  if (n < 100) throw InputError("simulate_normal needs n >= 100");
  if (cfg.m < 1 || cfg.r_true < 1 || cfg.var_order < 1) {
    throw InputError("invalid process config");
  }
  if (!(cfg.spectral_radius > 0.0 && cfg.spectral_radius < 1.0)) {
    throw InputError("spectral_radius must lie in (0,1)");
  }
  Rng rng(cfg.seed);
  const int m = cfg.m;
  const int r = cfg.r_true;
  const int p = cfg.var_order;

  // Sparse loading, unit-norm columns. Every component touches a sensor
  // and every sensor sees some signal; a dead row would make that sensor
  // pure noise, which no plant instrument is.
  Matrix loading = Matrix::Zero(m, r);
  for (int c = 0; c < r; ++c) {
    bool any = false;
    while (!any) {
      for (int j = 0; j < m; ++j) {
        const bool zero = rng.uniform01() < cfg.loading_sparsity;
        loading(j, c) = zero ? 0.0 : rng.normal();
        any = any || !zero;
      }
    }
  }
  for (int j = 0; j < m; ++j) {
    while (loading.row(j).cwiseAbs().maxCoeff() == 0.0) {
      for (int c = 0; c < r; ++c) {
        const bool zero = rng.uniform01() < cfg.loading_sparsity;
        loading(j, c) = zero ? 0.0 : rng.normal();
      }
    }
  }
  for (int c = 0; c < r; ++c) loading.col(c) /= loading.col(c).norm();

  // Per-sensor offset and gain so the raw data has units to standardize away.
  Vector offset(m), gain(m);
  for (int j = 0; j < m; ++j) offset(j) = 3.0 * rng.normal();
  for (int j = 0; j < m; ++j) gain(j) = 0.5 + 1.5 * rng.uniform01();

  // Stationary VAR coefficients: rescale lag-d blocks by s^d so the
  // companion spectrum shrinks onto the requested radius.
  std::vector<Matrix> coeffs;
  bool stable = false;
  for (int attempt = 0; attempt < 10 && !stable; ++attempt) {
    coeffs.assign(static_cast<std::size_t>(p), Matrix::Zero(r, r));
    for (int d = 0; d < p; ++d) {
      for (int a = 0; a < r; ++a) {
        for (int b = 0; b < r; ++b) {
          coeffs[static_cast<std::size_t>(d)](a, b) =
              rng.normal() / std::sqrt(static_cast<double>(r * p));
        }
      }
    }
    const double rho = spectral_radius(companion_matrix(coeffs, r));
    if (rho > 0.0) {
      const double s = cfg.spectral_radius / rho;
      for (int d = 0; d < p; ++d) {
        coeffs[static_cast<std::size_t>(d)] *= std::pow(s, d + 1);
      }
      stable = spectral_radius(companion_matrix(coeffs, r)) < 1.0;
    }
  }
  if (!stable) throw NumericError("could not stabilize latent dynamics");

  const int burn_in = 200;
  Matrix latents = Matrix::Zero(r, burn_in + n);
  for (int k = 0; k < burn_in + n; ++k) {
    Vector step(r);
    for (int c = 0; c < r; ++c) step(c) = rng.normal();
    for (int d = 1; d <= p && d <= k; ++d) {
      step += coeffs[static_cast<std::size_t>(d - 1)] * latents.col(k - d);
    }
    latents.col(k) = step;
  }

  DataMatrix data;
  data.tags = sensor_tags(m);
  data.sample_period = 1.0;
  data.values = loading * latents.rightCols(n);
  data.values.array().colwise() *= gain.array();
  data.values.colwise() += offset;

  // Measurement noise drawn last: the signal stream above is unchanged
  // when only noise_sigma differs.
  if (cfg.noise_sigma > 0.0) {
    for (Index i = 0; i < data.values.cols(); ++i) {
      for (Index j = 0; j < data.values.rows(); ++j) {
        data.values(j, i) += cfg.noise_sigma * rng.normal();
      }
    }
  }
  return data;
}

DataMatrix inject_fault(const DataMatrix& X, const FaultSpec& spec,
                        std::uint64_t seed) {
  const Index m = X.sensors();
  const Index n = X.samples();
  if (spec.onset < 1 || spec.onset + 1 > n) {
    throw InputError("fault onset out of range: " + std::to_string(spec.onset));
  }
  for (int s : spec.sensors) {
    if (s < 1 || s > m) {
      throw InputError("fault sensor index out of range: " + std::to_string(s));
    }
  }
  if (spec.kind == FaultKind::LevelSwing && spec.duration < 1) {
    throw InputError("level_swing requires duration >= 1");
  }
  if (!std::isfinite(spec.magnitude)) throw InputError("non-finite fault magnitude");

  const Vector sigma = per_sensor_std(X.values);
  DataMatrix out = X;
  Rng rng(seed);

  const Index start = spec.onset - 1;  // first faulty sample, 0-based
  const Index stop = (spec.duration > 0 && spec.kind != FaultKind::Drift &&
                      spec.kind != FaultKind::LevelSwing)
                         ? std::min<Index>(n, start + spec.duration)
                         : n;

  for (int s : spec.sensors) {
    const Index j = s - 1;
    const double scale = spec.magnitude * sigma(j);
    switch (spec.kind) {
      case FaultKind::Bias:
        for (Index i = start; i < stop; ++i) out.values(j, i) += scale;
        break;
      case FaultKind::Drift: {
        const Index ramp = spec.duration > 0 ? spec.duration : (n - start);
        for (Index i = start; i < n; ++i) {
          const double progress =
              std::min(1.0, static_cast<double>(i - start + 1) /
                                static_cast<double>(ramp));
          out.values(j, i) += progress * scale;
        }
        break;
      }
      case FaultKind::VarianceBurst: {
        // Adds independent noise so the sensor's overall std is scaled by
        // roughly |magnitude|; exact multiplication of the underlying noise
        // is not recoverable from the observed matrix alone.
        const double extra =
            sigma(j) * std::sqrt(std::max(spec.magnitude * spec.magnitude - 1.0, 0.0));
        for (Index i = start; i < stop; ++i) {
          out.values(j, i) += extra * rng.normal();
        }
        break;
      }
      case FaultKind::LevelSwing:
        for (Index i = start; i < n; ++i) {
          const Index block = (i - start) / spec.duration;
          const double sign = (block % 2 == 0) ? 1.0 : -1.0;
          out.values(j, i) += sign * scale;
        }
        break;
    }
  }
  return out;
}

Scenario preset_scenario(const std::string& name) {
  Scenario sc;
  sc.name = name;
  sc.process = ProcessConfig{};
  sc.n_train = 1000;
  sc.n_test = 400;
  if (name == "fault2-analogue") {
    // Noisy inter-electrode voltage: variance burst on the stack-voltage
    // sensor plus staged biases that move from one sensor group to another.
    sc.process.seed = 42;
    sc.faults = {
        FaultSpec{FaultKind::VarianceBurst, {8}, 201, 4.0, 0},
        FaultSpec{FaultKind::Bias, {24}, 201, 5.0, 100},
        FaultSpec{FaultKind::Bias, {27, 28}, 301, 5.0, 0},
    };
  } else if (name == "fault6-analogue") {
    // Sharp separator-level swings: square-wave steps on the hydrogen
    // separator level sensor.
    sc.process.seed = 43;
    sc.faults = {
        FaultSpec{FaultKind::LevelSwing, {3}, 201, 6.0, 60},
    };
  } else {
    throw InputError("unknown scenario preset: " + name);
  }
  return sc;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open scenario file: " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw InputError("malformed scenario JSON: " + std::string(e.what()));
  }
  try {
    if (doc.contains("preset")) {
      Scenario sc = preset_scenario(doc.at("preset").get<std::string>());
      if (doc.contains("seed")) sc.process.seed = doc.at("seed").get<std::uint64_t>();
      return sc;
    }
    Scenario sc;
    sc.name = doc.value("name", "scenario");
    const auto& proc = doc.at("process");
    sc.process.m = proc.value("m", 32);
    sc.process.r_true = proc.value("r_true", 5);
    sc.process.var_order = proc.value("var_order", 2);
    sc.process.spectral_radius = proc.value("spectral_radius", 0.85);
    sc.process.noise_sigma = proc.value("noise_sigma", 0.1);
    sc.process.loading_sparsity = proc.value("loading_sparsity", 0.6);
    sc.process.seed = proc.value("seed", std::uint64_t{0});
    sc.n_train = doc.value("n_train", 1000);
    sc.n_test = doc.value("n_test", 400);
    for (const auto& f : doc.value("faults", nlohmann::json::array())) {
      FaultSpec spec;
      spec.kind = fault_kind_from_string(f.at("kind").get<std::string>());
      spec.sensors = f.at("sensors").get<std::vector<int>>();
      spec.onset = f.value("onset", 201);
      spec.magnitude = f.at("magnitude").get<double>();
      spec.duration = f.value("duration", 0);
      sc.faults.push_back(std::move(spec));
    }
    return sc;
  } catch (const nlohmann::json::exception& e) {
    throw InputError("invalid scenario file: " + std::string(e.what()));
  }
}

}  // namespace vbspca
