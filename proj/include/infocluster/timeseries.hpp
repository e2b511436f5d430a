#pragma once

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "infocluster/statespace.hpp"

namespace infocluster {

/// Samples of N variables over M+1 time steps; rows are variables, columns
/// are time steps.
class TimeSeries {
 public:
  TimeSeries(Matrix data, std::vector<std::string> names,
             std::optional<double> dt = std::nullopt)
      : data_(std::move(data)), names_(std::move(names)), dt_(dt) {
    if (data_.cols() < 2) {
      throw Error(ErrorCode::kInvalidArgument,
                  "TimeSeries: at least two time steps are required");
    }
    if (static_cast<Index>(names_.size()) != data_.rows()) {
      throw Error(ErrorCode::kShapeMismatch,
                  "TimeSeries: names length must equal the number of variables");
    }
    if (!data_.allFinite()) {
      throw Error(ErrorCode::kNumericalDomain, "TimeSeries: non-finite sample");
    }
    if (dt_ && !(*dt_ > 0.0)) {
      throw Error(ErrorCode::kInvalidArgument, "TimeSeries: dt must be positive");
    }
  }

  const Matrix& data() const { return data_; }
  const std::vector<std::string>& names() const { return names_; }
  std::optional<double> dt() const { return dt_; }
  Index variables() const { return data_.rows(); }
  Index steps() const { return data_.cols(); }

  /// Index of a variable by name, or nullopt.
  std::optional<Index> find(const std::string& name) const {
    for (std::size_t i = 0; i < names_.size(); ++i) {
      if (names_[i] == name) return static_cast<Index>(i);
    }
    return std::nullopt;
  }

 private:
  Matrix data_;
  std::vector<std::string> names_;
  std::optional<double> dt_;
};

/// Per-variable zero-mean, unit-variance copy. Constant rows are only centred.
inline TimeSeries standardize(const TimeSeries& ts) {
  Matrix d = ts.data();
  for (Index r = 0; r < d.rows(); ++r) {
    const double mean = d.row(r).mean();
    d.row(r).array() -= mean;
    const double var = d.row(r).squaredNorm() / static_cast<double>(d.cols());
    if (var > 0.0) d.row(r) /= std::sqrt(var);
  }
  return TimeSeries(std::move(d), ts.names(), ts.dt());
}

/// CSV: a header of variable names, then one row per time step; values with
/// 17 significant digits.
inline void write_csv(const TimeSeries& ts, std::ostream& os,
                      const std::string& comment = {}) {
  if (!comment.empty()) os << "# " << comment << '\n';
  for (std::size_t i = 0; i < ts.names().size(); ++i) {
    os << (i ? "," : "") << ts.names()[i];
  }
  os << '\n';
  os << std::setprecision(17);
  for (Index t = 0; t < ts.steps(); ++t) {
    for (Index v = 0; v < ts.variables(); ++v) {
      os << (v ? "," : "") << ts.data()(v, t);
    }
    os << '\n';
  }
}

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, sep)) out.push_back(trim(field));
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

}  // namespace detail

/// Parses the CSV layout written by write_csv. Lines starting with '#' and
/// blank lines are skipped. Row numbers in diagnostics are 1-based data rows
/// (the first row after the header is row 1); line numbers count every line.
inline TimeSeries read_csv(std::istream& is, const std::string& source = "<stream>") {
  std::string line;
  long line_no = 0;
  std::vector<std::string> header;
  while (std::getline(is, line)) {
    ++line_no;
    const std::string t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    header = detail::split(t, ',');
    break;
  }
  if (header.empty()) {
    throw Error(ErrorCode::kParse, source + ": missing header row");
  }
  for (const auto& h : header) {
    if (h.empty()) {
      throw Error(ErrorCode::kParse,
                  source + ":" + std::to_string(line_no) + ": empty column name");
    }
  }
  const std::size_t n = header.size();
  std::vector<double> values;
  long rows = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const std::string t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    ++rows;
    const auto fields = detail::split(t, ',');
    if (fields.size() != n) {
      throw Error(ErrorCode::kParse, source + ":" + std::to_string(line_no) + ": row " +
                                         std::to_string(rows) + " has " +
                                         std::to_string(fields.size()) +
                                         " fields, expected " + std::to_string(n));
    }
    for (std::size_t c = 0; c < n; ++c) {
      const std::string& f = fields[c];
      char* end = nullptr;
      const double v = std::strtod(f.c_str(), &end);
      if (f.empty() || end != f.c_str() + f.size()) {
        throw Error(ErrorCode::kParse, source + ":" + std::to_string(line_no) + ": row " +
                                           std::to_string(rows) + ", column '" +
                                           header[c] + "': cannot parse '" + f + "'");
      }
      if (!std::isfinite(v)) {
        throw Error(ErrorCode::kNumericalDomain,
                    source + ":" + std::to_string(line_no) + ": row " +
                        std::to_string(rows) + ", column '" + header[c] +
                        "': non-finite value '" + f + "'");
      }
      values.push_back(v);
    }
  }
  if (rows < 2) {
    throw Error(ErrorCode::kParse, source + ": at least two data rows are required");
  }
  Matrix data(static_cast<Index>(n), rows);
  for (long r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      data(static_cast<Index>(c), r) = values[static_cast<std::size_t>(r) * n + c];
    }
  }
  return TimeSeries(std::move(data), std::move(header));
}

/// Reads a CSV file; throws kDataNotFound when it cannot be opened.
inline TimeSeries ingest_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::kDataNotFound, "cannot open data file '" + path + "'");
  }
  return read_csv(in, path);
}

}  // namespace infocluster
