#pragma once

#include <string>

#include "vbspca/core_data.hpp"
#include "vbspca/monitoring.hpp"
#include "vbspca/sparse_var.hpp"
#include "vbspca/types.hpp"

namespace vbspca {

// Everything a detection run needs, in one JSON container. The top-level
// schema tag is "vbspca-gaussian/1" or "vbspca-laplace/1"; the VAR block
// carries "sparse-var/1".
struct ModelBundle {
  std::string variant;  // "gaussian" | "laplace"
  Scaler scaler;
  Matrix loading;
  Vector latent_scale;
  double noise_precision = 0.0;
  Vector mean_correction;
  int rank = 0;
  bool converged = false;
  std::string hyper_json;  // variant hyperparameters, verbatim
  VarModel var;
  MonitorProfile monitor;
};

void save_model(const ModelBundle& bundle, const std::string& path);
ModelBundle load_model(const std::string& path);

}  // namespace vbspca
