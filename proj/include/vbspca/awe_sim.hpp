#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vbspca/core_data.hpp"
#include "vbspca/types.hpp"

namespace vbspca {

// Synthetic electrolyzer-like process: a stationary latent VAR drives a
// sparse sensor loading, plus i.i.d. Gaussian measurement noise. Not a
// physics model; it reproduces the statistical structure the monitoring
// pipeline assumes (low rank, autocorrelated latents, sparse loadings,
// noisy sensors).
struct ProcessConfig {
  int m = 32;
  int r_true = 5;
  int var_order = 2;
  double spectral_radius = 0.85;  // companion-matrix target, < 1
  double noise_sigma = 0.1;
  double loading_sparsity = 0.6;  // fraction of exactly-zero loading entries
  std::uint64_t seed = 0;
};

enum class FaultKind { Bias, Drift, VarianceBurst, LevelSwing };

FaultKind fault_kind_from_string(const std::string& name);
std::string to_string(FaultKind kind);

// sensors and onset are 1-based. duration == 0 means open-ended, except
// for LevelSwing where duration is the half-period of the square wave
// (required >= 1). Drift ramps over `duration` samples then holds.
struct FaultSpec {
  FaultKind kind = FaultKind::Bias;
  std::vector<int> sensors;
  int onset = 201;
  double magnitude = 0.0;  // in units of the sensor's sample std
  int duration = 0;
};

struct Scenario {
  std::string name;
  ProcessConfig process;
  int n_train = 1000;
  int n_test = 400;
  std::vector<FaultSpec> faults;
};

/// CV(1)..CV(10) then PV(1).. for the remaining sensors.
std::vector<std::string> sensor_tags(int m);

/// Draws a stationary latent VAR trajectory and maps it through a sparse
/// loading with additive noise. Deterministic given cfg.seed; the
/// measurement noise is drawn last in the stream, so two runs that differ
/// only in noise_sigma share the same signal part.
DataMatrix simulate_normal(const ProcessConfig& cfg, int n);

/// Applies one fault to a copy of X. Samples before the onset are
/// bit-identical to the input. Magnitudes are scaled by the per-sensor
/// sample std of the input matrix.
DataMatrix inject_fault(const DataMatrix& X, const FaultSpec& spec,
                        std::uint64_t seed);

Scenario preset_scenario(const std::string& name);
Scenario load_scenario(const std::string& path);

}  // namespace vbspca
