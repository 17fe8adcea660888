#include "vbspca/serialize.hpp"

#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "vbspca/errors.hpp"

namespace vbspca {

namespace {

using nlohmann::json;

json matrix_to_json(const Matrix& mat) {
  json rows = json::array();
  for (Index i = 0; i < mat.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < mat.cols(); ++j) row.push_back(mat(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const json& rows) {
  if (!rows.is_array() || rows.empty()) throw InputError("expected matrix rows");
  const Index n_rows = static_cast<Index>(rows.size());
  const Index n_cols = static_cast<Index>(rows.front().size());
  Matrix mat(n_rows, n_cols);
  for (Index i = 0; i < n_rows; ++i) {
    const auto& row = rows[static_cast<std::size_t>(i)];
    if (static_cast<Index>(row.size()) != n_cols) {
      throw InputError("ragged matrix rows in model file");
    }
    for (Index j = 0; j < n_cols; ++j) {
      mat(i, j) = row[static_cast<std::size_t>(j)].get<double>();
    }
  }
  return mat;
}

json vector_to_json(const Vector& vec) {
  json out = json::array();
  for (Index i = 0; i < vec.size(); ++i) out.push_back(vec(i));
  return out;
}

Vector vector_from_json(const json& arr) {
  Vector vec(static_cast<Index>(arr.size()));
  for (std::size_t i = 0; i < arr.size(); ++i) {
    vec(static_cast<Index>(i)) = arr[i].get<double>();
  }
  return vec;
}

}  // namespace

void save_model(const ModelBundle& bundle, const std::string& path) {
  json doc;
  doc["schema"] = "vbspca-" + bundle.variant + "/1";
  doc["scaler"] = {{"mean", vector_to_json(bundle.scaler.mean)},
                   {"std", vector_to_json(bundle.scaler.std)},
                   {"tags", bundle.scaler.tags}};
  doc["loading"] = matrix_to_json(bundle.loading);
  doc["latent_scale"] = vector_to_json(bundle.latent_scale);
  doc["noise_precision"] = bundle.noise_precision;
  doc["mean_correction"] = vector_to_json(bundle.mean_correction);
  doc["rank"] = bundle.rank;
  doc["converged"] = bundle.converged;
  if (!bundle.hyper_json.empty()) {
    doc["hyper"] = json::parse(bundle.hyper_json);
  }
  doc["var"] = {{"schema", "sparse-var/1"},
                {"omega", matrix_to_json(bundle.var.omega)},
                {"tau", bundle.var.tau},
                {"lambda", bundle.var.lambda},
                {"r", bundle.var.r}};
  doc["monitor"] = {{"lambda_diag", vector_to_json(bundle.monitor.lambda_diag)},
                    {"t2_limit", bundle.monitor.t2_limit},
                    {"spe_limit", bundle.monitor.spe_limit},
                    {"alpha", bundle.monitor.alpha},
                    {"bandwidth_t2", bundle.monitor.bandwidth_t2},
                    {"bandwidth_spe", bundle.monitor.bandwidth_spe},
                    {"lag", bundle.monitor.lag}};

  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw InputError("cannot write model file: " + tmp);
    out << doc.dump(2) << '\n';
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    throw InputError("cannot rename " + tmp + " to " + path);
  }
}

ModelBundle load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open model file: " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw InputError("malformed model file: " + std::string(e.what()));
  }
  try {
    ModelBundle bundle;
    const std::string schema = doc.at("schema").get<std::string>();
    if (schema == "vbspca-gaussian/1") {
      bundle.variant = "gaussian";
    } else if (schema == "vbspca-laplace/1") {
      bundle.variant = "laplace";
    } else {
      throw InputError("unsupported model schema: " + schema);
    }
    const auto& scaler = doc.at("scaler");
    bundle.scaler.mean = vector_from_json(scaler.at("mean"));
    bundle.scaler.std = vector_from_json(scaler.at("std"));
    bundle.scaler.tags = scaler.at("tags").get<std::vector<std::string>>();
    bundle.loading = matrix_from_json(doc.at("loading"));
    bundle.latent_scale = vector_from_json(doc.at("latent_scale"));
    bundle.noise_precision = doc.at("noise_precision").get<double>();
    bundle.mean_correction = vector_from_json(doc.at("mean_correction"));
    bundle.rank = doc.at("rank").get<int>();
    bundle.converged = doc.at("converged").get<bool>();
    if (doc.contains("hyper")) bundle.hyper_json = doc.at("hyper").dump();
    const auto& var = doc.at("var");
    if (var.at("schema").get<std::string>() != "sparse-var/1") {
      throw InputError("unsupported VAR schema");
    }
    bundle.var.omega = matrix_from_json(var.at("omega"));
    bundle.var.tau = var.at("tau").get<int>();
    bundle.var.lambda = var.at("lambda").get<double>();
    bundle.var.r = var.at("r").get<int>();
    const auto& mon = doc.at("monitor");
    bundle.monitor.lambda_diag = vector_from_json(mon.at("lambda_diag"));
    bundle.monitor.t2_limit = mon.at("t2_limit").get<double>();
    bundle.monitor.spe_limit = mon.at("spe_limit").get<double>();
    bundle.monitor.alpha = mon.at("alpha").get<double>();
    bundle.monitor.bandwidth_t2 = mon.at("bandwidth_t2").get<double>();
    bundle.monitor.bandwidth_spe = mon.at("bandwidth_spe").get<double>();
    bundle.monitor.lag = mon.at("lag").get<int>();
    return bundle;
  } catch (const json::exception& e) {
    throw InputError("invalid model file: " + std::string(e.what()));
  }
}

}  // namespace vbspca
