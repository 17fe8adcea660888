#pragma once

#include <optional>
#include <string>
#include <vector>

#include "vbspca/types.hpp"

namespace vbspca {

// Sensor-major data block: row j is sensor j, column i is sample i.
// Columns are in time order. Immutable by convention once built.
struct DataMatrix {
  Matrix values;                  // m sensors x n samples
  std::vector<std::string> tags;  // m sensor names
  std::optional<double> sample_period;

  Index sensors() const { return values.rows(); }
  Index samples() const { return values.cols(); }
};

struct Scaler {
  Vector mean;  // per sensor
  Vector std;   // per sensor, strictly positive
  std::vector<std::string> tags;
};

/// Reads a header + numeric rows CSV ('.' decimal, no quoting) into a
/// DataMatrix, transposing rows-as-samples into sensors x samples.
/// Rejects ragged rows, non-numeric or non-finite fields (reported with
/// 1-based file row and column), and files with fewer than 2 data rows.
DataMatrix load_csv(const std::string& path);

/// Writes the transpose of a DataMatrix back to CSV (samples as rows),
/// full-precision decimals, atomically (temp file + rename).
void write_csv(const DataMatrix& data, const std::string& path);

/// Per-sensor mean and sample standard deviation (n-1 divisor).
/// A constant sensor is an error naming the offending tag.
Scaler fit_scaler(const DataMatrix& data);

/// (x - mean) / std per sensor. Dimension and tag order must match.
DataMatrix apply_scaler(const Scaler& scaler, const DataMatrix& data);

}  // namespace vbspca
