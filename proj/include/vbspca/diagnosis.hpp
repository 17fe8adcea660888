#pragma once

#include <string>
#include <vector>

#include "vbspca/core_data.hpp"
#include "vbspca/types.hpp"

namespace vbspca {

enum class IndexKind { T2, SPE };

IndexKind index_kind_from_string(const std::string& name);
std::string to_string(IndexKind kind);

// Quadratic form behind a detection index: Index(y) = y' Phi y.
// T2 uses P diag(lambda) P', SPE uses I - P P'.
struct IndexMatrix {
  Matrix phi;
  IndexKind kind = IndexKind::SPE;
};

// Per-sample, per-sensor reconstruction-based contributions. NaN marks a
// sensor the index cannot attribute along (Phi_kk ~ 0).
struct RbcMap {
  Matrix values;  // n_samples x m
  IndexKind kind = IndexKind::SPE;
  std::vector<std::string> tags;
};

IndexMatrix build_index_matrix(const Matrix& loading, const Vector& lambda_diag,
                               IndexKind kind);

/// Magnitude of the index-minimizing fault along a unit direction:
/// f = (phi' Phi phi)^{-1} phi' Phi y. Directions in the null space of
/// Phi are undiagnosable and raise an error.
double fault_magnitude(const Vector& y, const IndexMatrix& index,
                       const Vector& direction);

/// RBC for the unit direction of one sensor: (Phi y)_k^2 / Phi_kk.
/// Satisfies Index(y) = Index(y - f e_k) + RBC_k.
double rbc(const Vector& y, const IndexMatrix& index, Index sensor);

RbcMap rbc_map(const DataMatrix& Y_test, const Matrix& loading,
               const Vector& lambda_diag, IndexKind kind);

/// Long-format CSV: sample, tag, kind, rbc (empty when undiagnosable).
void write_rbc_csv(const RbcMap& map, const std::string& path);
/// JSON matrix for plotting clients; nulls mark undiagnosable cells.
void write_rbc_json(const RbcMap& map, const std::string& path);

}  // namespace vbspca
