#pragma once

// Dataset CSV format: header `x1..xd,t,y` followed by the optional oracle
// columns `group,y0,y1,tau`. Reals are written with 17 significant digits so
// a write/read cycle is exact.

#include "ecm/core.hpp"

#include <cstdlib>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace ecm::io {

inline std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    std::string_view field = line.substr(start, comma == std::string_view::npos ? line.npos : comma - start);
    while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
    while (!field.empty() && (field.back() == ' ' || field.back() == '\t')) field.remove_suffix(1);
    if (field.size() >= 2 && field.front() == '"' && field.back() == '"')
      field = field.substr(1, field.size() - 2);
    out.emplace_back(field);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline bool try_parse_real(std::string_view s, double& out) {
  if (s.empty()) return false;
  // strtod accepts forms from_chars rejects (leading '+').
  std::string tmp(s);
  char* end = nullptr;
  out = std::strtod(tmp.c_str(), &end);
  return end == tmp.c_str() + tmp.size();
}

inline double parse_real(std::string_view s, std::size_t line, std::string_view column) {
  double v = 0.0;
  if (!try_parse_real(s, v) || !std::isfinite(v))
    throw ValidationError("line " + std::to_string(line) + ": column '" + std::string(column) +
                          "' is not a finite number: '" + std::string(s) + "'");
  return v;
}

inline int parse_binary(std::string_view s, std::size_t line, std::string_view column) {
  if (s == "0") return 0;
  if (s == "1") return 1;
  throw ValidationError("line " + std::to_string(line) + ": column '" + std::string(column) +
                        "' must be 0 or 1, got '" + std::string(s) + "'");
}

inline Dataset read_dataset(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("dataset file is empty");
  const std::vector<std::string> header = split_csv_line(line);

  std::vector<std::size_t> feature_cols;
  auto find = [&](std::string_view name) -> std::ptrdiff_t {
    for (std::size_t c = 0; c < header.size(); ++c)
      if (header[c] == name) return static_cast<std::ptrdiff_t>(c);
    return -1;
  };
  for (std::size_t j = 1;; ++j) {
    const auto c = find("x" + std::to_string(j));
    if (c < 0) break;
    feature_cols.push_back(static_cast<std::size_t>(c));
  }
  const auto ct = find("t"), cy = find("y");
  if (feature_cols.empty() || ct < 0 || cy < 0)
    throw ValidationError("line 1: header must contain x1..xd, t and y columns");
  const auto cg = find("group"), c0 = find("y0"), c1 = find("y1"), ctau = find("tau");
  const int oracle_cols = (cg >= 0) + (c0 >= 0) + (c1 >= 0) + (ctau >= 0);
  if (oracle_cols != 0 && oracle_cols != 4)
    throw ValidationError("line 1: oracle columns group,y0,y1,tau must appear together");
  const bool with_oracle = oracle_cols == 4;

  std::vector<double> xs;
  std::vector<int> ts, ys;
  Oracle oracle;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto f = split_csv_line(line);
    if (f.size() != header.size())
      throw ValidationError("line " + std::to_string(line_no) + ": expected " +
                            std::to_string(header.size()) + " fields, got " + std::to_string(f.size()));
    for (auto c : feature_cols) xs.push_back(parse_real(f[c], line_no, header[c]));
    ts.push_back(parse_binary(f[static_cast<std::size_t>(ct)], line_no, "t"));
    ys.push_back(parse_binary(f[static_cast<std::size_t>(cy)], line_no, "y"));
    if (with_oracle) {
      try {
        oracle.group.push_back(parse_group(f[static_cast<std::size_t>(cg)]));
      } catch (const ValidationError& e) {
        throw ValidationError("line " + std::to_string(line_no) + ": " + e.what());
      }
      oracle.y0.push_back(parse_binary(f[static_cast<std::size_t>(c0)], line_no, "y0"));
      oracle.y1.push_back(parse_binary(f[static_cast<std::size_t>(c1)], line_no, "y1"));
      oracle.tau.push_back(parse_real(f[static_cast<std::size_t>(ctau)], line_no, "tau"));
    }
  }
  const auto n = static_cast<Eigen::Index>(ts.size());
  const auto d = static_cast<Eigen::Index>(feature_cols.size());
  Eigen::MatrixXd x(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) x(i, j) = xs[static_cast<std::size_t>(i * d + j)];
  std::optional<Oracle> o;
  if (with_oracle) o = std::move(oracle);
  return Dataset(std::move(x), std::move(ts), std::move(ys), std::move(o));
}

inline Dataset read_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open dataset '" + path + "'");
  return read_dataset(in);
}

inline void write_dataset(std::ostream& out, const Dataset& data) {
  const std::size_t d = data.dim();
  for (std::size_t j = 1; j <= d; ++j) out << 'x' << j << ',';
  out << "t,y";
  if (data.has_oracle()) out << ",group,y0,y1,tau";
  out << '\n';
  const auto& x = data.features();
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (std::size_t j = 0; j < d; ++j)
      out << format_real(x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))) << ',';
    out << data.t(i) << ',' << data.y(i);
    if (const auto& o = data.oracle()) {
      out << ',' << group_code(o->group[i]) << ',' << o->y0[i] << ',' << o->y1[i] << ','
          << format_real(o->tau[i]);
    }
    out << '\n';
  }
}

inline void write_dataset(const std::string& path, const Dataset& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FitError("cannot write dataset '" + path + "'");
  write_dataset(out, data);
  if (!out) throw FitError("write failed for '" + path + "'");
}

}  // namespace ecm::io
