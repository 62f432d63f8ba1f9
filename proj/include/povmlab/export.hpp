// Copyright 2026 The povmlab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Writing result records as JSON, CSV, plot data and plain-text reports.

#ifndef POVMLAB_EXPORT_HPP
#define POVMLAB_EXPORT_HPP

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "povmlab/errors.hpp"
#include "povmlab/experiment.hpp"

namespace povmlab {

enum class ExportFormat { kJson, kCsv, kPlotData };

inline ExportFormat parse_format(const std::string& s) {
  if (s == "json") return ExportFormat::kJson;
  if (s == "csv") return ExportFormat::kCsv;
  if (s == "plotdata") return ExportFormat::kPlotData;
  throw ValidationError("--format", "unknown format '" + s + "' (json, csv, plotdata)");
}

/// Shortest %.17g text for a double; parsing it back gives the same value.
inline std::string format_exact(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

namespace detail {

inline void flatten(const Json& j, const std::string& prefix, std::vector<std::pair<std::string, std::string>>& out) {
  if (j.is_object()) {
    for (const auto& [k, v] : j.items()) flatten(v, prefix.empty() ? k : prefix + "." + k, out);
  } else if (j.is_array()) {
    for (std::size_t i = 0; i < j.size(); ++i) flatten(j[i], prefix + "." + std::to_string(i), out);
  } else if (j.is_number()) {
    out.emplace_back(prefix, format_exact(j.get<double>()));
  } else if (j.is_string()) {
    out.emplace_back(prefix, j.get<std::string>());
  } else if (j.is_boolean()) {
    out.emplace_back(prefix, j.get<bool>() ? "true" : "false");
  } else {
    out.emplace_back(prefix, "");
  }
}

}  // namespace detail

/// Flattened config leaves (dotted, prefixed "config.") followed by metrics.
/// Columns are the union over all records in first-seen order.
inline std::string to_csv(const std::vector<ResultRecord>& records) {
  std::vector<std::string> columns;
  std::vector<std::map<std::string, std::string>> rows;
  auto add = [&](std::map<std::string, std::string>& row, const std::string& key, std::string value) {
    if (row.find(key) == row.end() && std::find(columns.begin(), columns.end(), key) == columns.end()) {
      columns.push_back(key);
    }
    row[key] = std::move(value);
  };
  for (const auto& r : records) {
    std::map<std::string, std::string> row;
    std::vector<std::pair<std::string, std::string>> leaves;
    detail::flatten(r.config, "config", leaves);
    for (auto& [k, v] : leaves) add(row, k, std::move(v));
    for (const auto& [k, v] : r.metrics) add(row, k, format_exact(v));
    rows.push_back(std::move(row));
  }
  std::ostringstream os;
  for (std::size_t c = 0; c < columns.size(); ++c) os << (c ? "," : "") << csv_field(columns[c]);
  os << "\r\n";
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < columns.size(); ++c) {
      auto it = row.find(columns[c]);
      os << (c ? "," : "") << (it == row.end() ? "" : csv_field(it->second));
    }
    os << "\r\n";
  }
  return os.str();
}

/// Minimal RFC 4180 reader, enough to round-trip what to_csv writes.
inline std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
      any = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
      any = true;
    } else if (c == '\r' || c == '\n') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      row.push_back(std::move(field));
      field.clear();
      rows.push_back(std::move(row));
      row.clear();
      any = false;
    } else {
      field += c;
      any = true;
    }
  }
  if (any || !field.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline std::string plot_table(const Distribution& d) {
  std::ostringstream os;
  os << "#";
  for (const auto& c : d.columns) os << ' ' << c;
  os << '\n';
  for (const auto& row : d.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) os << (i ? " " : "") << format_exact(row[i]);
    os << '\n';
  }
  return os.str();
}

inline std::string format_report(const std::vector<ResultRecord>& records) {
  std::ostringstream os;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    os << "record " << i << "  kind=" << r.kind << "  " << (r.passed() ? "PASS" : "FAIL") << '\n';
    for (const auto& [k, v] : r.metrics) {
      char buf[96];
      std::snprintf(buf, sizeof buf, "  %-30s %.10g\n", k.c_str(), v);
      os << buf;
    }
    for (const auto& c : r.checks) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "  [%s] %-28s %.6g %s %.6g\n", c.pass ? "ok" : "FAIL", c.name.c_str(), c.value,
                    c.relation.c_str(), c.tolerance);
      os << buf;
    }
  }
  return os.str();
}

namespace detail {

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw Error("cannot write " + p.string());
  f << text;
  if (!f) throw Error("failed writing " + p.string());
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) throw Error("cannot read " + p.string());
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

}  // namespace detail

inline Json records_to_json(const std::vector<ResultRecord>& records, bool timing) {
  Json arr = Json::array();
  for (const auto& r : records) arr.push_back(to_json(r, timing));
  return arr;
}

inline std::vector<ResultRecord> records_from_json(const Json& j) {
  std::vector<ResultRecord> out;
  if (j.is_array()) {
    for (const auto& r : j) out.push_back(record_from_json(r));
  } else {
    out.push_back(record_from_json(j));
  }
  return out;
}

/// Writes records into `dir` (created if needed) and returns the written paths.
inline std::vector<std::filesystem::path> export_records(const std::vector<ResultRecord>& records, ExportFormat format,
                                                         const std::filesystem::path& dir, bool timing = false) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> written;
  switch (format) {
    case ExportFormat::kJson: {
      const auto p = dir / "records.json";
      detail::write_file(p, records_to_json(records, timing).dump(2) + "\n");
      written.push_back(p);
      break;
    }
    case ExportFormat::kCsv: {
      const auto p = dir / "records.csv";
      detail::write_file(p, to_csv(records));
      written.push_back(p);
      break;
    }
    case ExportFormat::kPlotData:
      for (std::size_t i = 0; i < records.size(); ++i) {
        for (const auto& d : records[i].distributions) {
          const auto p = dir / ("r" + std::to_string(i) + "_" + d.name + ".dat");
          detail::write_file(p, plot_table(d));
          written.push_back(p);
        }
      }
      break;
  }
  return written;
}

}  // namespace povmlab

#endif  // POVMLAB_EXPORT_HPP
