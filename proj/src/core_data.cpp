#include "vbspca/core_data.hpp"

#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "vbspca/errors.hpp"

namespace vbspca {

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(',', start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

double parse_field(const std::string& field, std::size_t file_row, std::size_t col) {
  const std::string token = trim(field);
  double value = 0.0;
  const char* first = token.data();
  const char* last = token.data() + token.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || token.empty()) {
    throw InputError("non-numeric field at row " + std::to_string(file_row) +
                     ", column " + std::to_string(col));
  }
  if (!std::isfinite(value)) {
    throw InputError("non-finite value at row " + std::to_string(file_row) +
                     ", column " + std::to_string(col));
  }
  return value;
}

}  // namespace

DataMatrix load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open CSV file: " + path);

  std::string line;
  if (!std::getline(in, line)) throw InputError("empty CSV file: " + path);

  std::vector<std::string> tags;
  for (const auto& field : split_fields(line)) {
    tags.push_back(trim(field));
  }
  const std::size_t m = tags.size();

  std::vector<std::vector<double>> rows;
  std::size_t file_row = 1;
  while (std::getline(in, line)) {
    ++file_row;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != m) {
      throw InputError("ragged row " + std::to_string(file_row) + ": expected " +
                       std::to_string(m) + " fields, got " +
                       std::to_string(fields.size()));
    }
    std::vector<double> row(m);
    for (std::size_t c = 0; c < m; ++c) {
      row[c] = parse_field(fields[c], file_row, c + 1);
    }
    rows.push_back(std::move(row));
  }

  if (rows.size() < 2) {
    throw InputError("CSV needs at least 2 data rows, got " +
                     std::to_string(rows.size()) + ": " + path);
  }

  DataMatrix data;
  data.tags = std::move(tags);
  data.values.resize(static_cast<Index>(m), static_cast<Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      data.values(static_cast<Index>(j), static_cast<Index>(i)) = rows[i][j];
    }
  }
  return data;
}

void write_csv(const DataMatrix& data, const std::string& path) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw InputError("cannot write CSV file: " + tmp);
    for (std::size_t j = 0; j < data.tags.size(); ++j) {
      if (j > 0) out << ',';
      out << data.tags[j];
    }
    out << '\n';
    char buf[64];
    for (Index i = 0; i < data.samples(); ++i) {
      for (Index j = 0; j < data.sensors(); ++j) {
        std::snprintf(buf, sizeof(buf), "%.17g", data.values(j, i));
        if (j > 0) out << ',';
        out << buf;
      }
      out << '\n';
    }
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    throw InputError("cannot rename " + tmp + " to " + path);
  }
}

Scaler fit_scaler(const DataMatrix& data) {
  const Index m = data.sensors();
  const Index n = data.samples();
  Scaler scaler;
  scaler.mean.resize(m);
  scaler.std.resize(m);
  scaler.tags = data.tags;
  for (Index j = 0; j < m; ++j) {
    const double mean = data.values.row(j).mean();
    const double ss = (data.values.row(j).array() - mean).square().sum();
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));
    if (!(sd > 0.0)) {
      throw InputError("constant sensor: " + data.tags[static_cast<std::size_t>(j)]);
    }
    scaler.mean(j) = mean;
    scaler.std(j) = sd;
  }
  return scaler;
}

DataMatrix apply_scaler(const Scaler& scaler, const DataMatrix& data) {
  if (scaler.mean.size() != data.sensors()) {
    throw InputError("scaler dimension mismatch: scaler has " +
                     std::to_string(scaler.mean.size()) + " sensors, data has " +
                     std::to_string(data.sensors()));
  }
  if (!scaler.tags.empty() && scaler.tags != data.tags) {
    throw InputError("scaler tag mismatch");
  }
  DataMatrix out;
  out.tags = data.tags;
  out.sample_period = data.sample_period;
  out.values = (data.values.colwise() - scaler.mean).array().colwise() /
               scaler.std.array();
  return out;
}

}  // namespace vbspca
