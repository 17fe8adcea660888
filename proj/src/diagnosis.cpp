#include "vbspca/diagnosis.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "vbspca/errors.hpp"

namespace vbspca {

namespace {
constexpr double kDiagEps = 1e-12;
}

IndexKind index_kind_from_string(const std::string& name) {
  if (name == "t2" || name == "T2") return IndexKind::T2;
  if (name == "spe" || name == "SPE") return IndexKind::SPE;
  throw InputError("unknown index kind: " + name);
}

std::string to_string(IndexKind kind) {
  return kind == IndexKind::T2 ? "t2" : "spe";
}

IndexMatrix build_index_matrix(const Matrix& loading, const Vector& lambda_diag,
                               IndexKind kind) {
  IndexMatrix index;
  index.kind = kind;
  if (kind == IndexKind::T2) {
    if (lambda_diag.size() != loading.cols()) {
      throw InputError("lambda_diag size must match the loading rank");
    }
    index.phi = loading * lambda_diag.asDiagonal() * loading.transpose();
  } else {
    index.phi = Matrix::Identity(loading.rows(), loading.rows()) -
                loading * loading.transpose();
  }
  index.phi = ((index.phi + index.phi.transpose()) / 2.0).eval();
  return index;
}

double fault_magnitude(const Vector& y, const IndexMatrix& index,
                       const Vector& direction) {
  if (y.size() != index.phi.rows() || direction.size() != index.phi.rows()) {
    throw InputError("fault direction dimension mismatch");
  }
  const Vector phi_dir = index.phi * direction;
  const double curvature = direction.dot(phi_dir);
  if (curvature <= kDiagEps) {
    throw NumericError("direction lies in the null space of the index");
  }
  return phi_dir.dot(y) / curvature;
}

double rbc(const Vector& y, const IndexMatrix& index, Index sensor) {
  if (sensor < 0 || sensor >= index.phi.rows()) {
    throw InputError("sensor index out of range");
  }
  if (y.size() != index.phi.rows()) throw InputError("RBC dimension mismatch");
  const double diag = index.phi(sensor, sensor);
  if (diag <= kDiagEps) {
    throw NumericError("sensor is undiagnosable for this index");
  }
  const double numerator = index.phi.row(sensor).dot(y);
  return numerator * numerator / diag;
}

RbcMap rbc_map(const DataMatrix& Y_test, const Matrix& loading,
               const Vector& lambda_diag, IndexKind kind) {
  const IndexMatrix index = build_index_matrix(loading, lambda_diag, kind);
  const Index m = Y_test.sensors();
  const Index n = Y_test.samples();
  if (index.phi.rows() != m) throw InputError("loading/data dimension mismatch");

  RbcMap map;
  map.kind = kind;
  map.tags = Y_test.tags;
  map.values.resize(n, m);
  for (Index k = 0; k < m; ++k) {
    const double diag = index.phi(k, k);
    if (diag <= kDiagEps) {
      map.values.col(k).setConstant(std::numeric_limits<double>::quiet_NaN());
      continue;
    }
    // (Phi y_i)_k for all samples at once.
    const Vector numerators =
        (index.phi.row(k) * Y_test.values).transpose();
    map.values.col(k) = numerators.array().square() / diag;
  }
  return map;
}

void write_rbc_csv(const RbcMap& map, const std::string& path) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw InputError("cannot write " + tmp);
    out << "sample,tag,kind,rbc\n";
    char buf[64];
    const std::string kind = to_string(map.kind);
    for (Index i = 0; i < map.values.rows(); ++i) {
      for (Index j = 0; j < map.values.cols(); ++j) {
        out << (i + 1) << ',' << map.tags[static_cast<std::size_t>(j)] << ','
            << kind << ',';
        const double v = map.values(i, j);
        if (std::isnan(v)) {
          out << '\n';
        } else {
          std::snprintf(buf, sizeof(buf), "%.17g\n", v);
          out << buf;
        }
      }
    }
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    throw InputError("cannot rename " + tmp + " to " + path);
  }
}

void write_rbc_json(const RbcMap& map, const std::string& path) {
  nlohmann::json doc;
  doc["kind"] = to_string(map.kind);
  doc["tags"] = map.tags;
  nlohmann::json rows = nlohmann::json::array();
  for (Index i = 0; i < map.values.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Index j = 0; j < map.values.cols(); ++j) {
      const double v = map.values(i, j);
      if (std::isnan(v)) {
        row.push_back(nullptr);
      } else {
        row.push_back(v);
      }
    }
    rows.push_back(std::move(row));
  }
  doc["rbc"] = std::move(rows);
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
