#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace polylab {

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Long-format results table: one row per (t, estimator).
struct CsvRow {
  double t = 0.0;
  double beta = 0.0;
  double alpha = 0.0;
  std::string estimator;
  double value = 0.0;
  double stderr_value = 0.0;
  std::uint64_t n_paths = 0;
  std::uint64_t n_fields = 0;
  std::uint64_t seed = 0;
};

inline std::string csv_to_string(const std::vector<CsvRow>& rows) {
  std::string out = "t,beta,alpha,estimator,value,stderr,n_paths,n_fields,seed\n";
  for (const auto& r : rows) {
    out += format_double(r.t) + "," + format_double(r.beta) + "," +
           format_double(r.alpha) + "," + r.estimator + "," +
           format_double(r.value) + "," + format_double(r.stderr_value) + "," +
           std::to_string(r.n_paths) + "," + std::to_string(r.n_fields) + "," +
           std::to_string(r.seed) + "\n";
  }
  return out;
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace polylab
