#pragma once

// File formats.
//
// Matrices are CSV with one row per product and one column per observation,
// comma separated, LF line endings, no header unless requested. Reals are
// written with 17 significant digits so they read back exactly.
//
// Models are JSON:
//   {"schema_version": 1, "n": n, "r": r, "lambda": l,
//    "B": [...], "C": [...],            row-major, n*r entries each
//    "s": [...], "log_d_nom": [...],    n entries each
//    "metadata": {"method", "iterations", "objective", "objective_kind",
//                 "seed", "eps_rel", "eps_abs", "termination"}}

#include <nlohmann/json.hpp>

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "elastifit/core.hpp"
#include "elastifit/error.hpp"

namespace elastifit::io {

inline constexpr int kModelSchemaVersion = 1;

struct CsvOptions {
  bool header = false;  // first line holds column labels
};

inline std::string format_real(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::string where(const std::string& path, std::size_t row, std::size_t col) {
  return path + ": row " + std::to_string(row) + ", column " + std::to_string(col);
}

}  // namespace detail

/// Parses CSV text into a matrix. `source` names the input in errors; rows and
/// columns in messages are 1-based data positions.
inline Matrix parse_csv(std::string_view text, const std::string& source,
                        const CsvOptions& opt = {}) {
  std::vector<std::vector<double>> rows;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  bool skip_header = opt.header;
  while (pos <= text.size()) {
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    std::string_view line = detail::trim(text.substr(pos, end - pos));
    pos = end + 1;
    if (skip_header) {
      skip_header = false;
      continue;
    }
    if (line.empty()) {
      if (pos > text.size()) break;
      continue;
    }
    ++line_no;
    std::vector<double> row;
    std::size_t field_start = 0;
    for (std::size_t col = 1;; ++col) {
      const std::size_t comma = line.find(',', field_start);
      std::string_view field =
          detail::trim(line.substr(field_start, comma == std::string_view::npos
                                                    ? std::string_view::npos
                                                    : comma - field_start));
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
      if (field.empty() || ec != std::errc() || ptr != field.data() + field.size()) {
        throw DataError(detail::where(source, line_no, col) + ": cannot parse '" +
                        std::string(field) + "' as a number");
      }
      row.push_back(v);
      if (comma == std::string_view::npos) break;
      field_start = comma + 1;
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw DataError(source + ": row " + std::to_string(line_no) + " has " +
                      std::to_string(row.size()) + " fields, expected " +
                      std::to_string(rows.front().size()));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DataError(source + ": no data rows");
  Matrix M(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      M(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
  return M;
}

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw IoError("failed writing '" + path + "'");
}

inline Matrix read_csv(const std::string& path, const CsvOptions& opt = {}) {
  return parse_csv(read_text(path), path, opt);
}

/// Demand counts: every entry must be a nonnegative integer.
inline Matrix read_demands(const std::string& path, const CsvOptions& opt = {}) {
  Matrix D = read_csv(path, opt);
  for (Index i = 0; i < D.rows(); ++i) {
    for (Index j = 0; j < D.cols(); ++j) {
      const double v = D(i, j);
      if (!std::isfinite(v) || v < 0.0 || v != std::floor(v)) {
        throw DataError(detail::where(path, static_cast<std::size_t>(i + 1),
                                      static_cast<std::size_t>(j + 1)) +
                        ": demand must be a nonnegative integer, got " + format_real(v));
      }
    }
  }
  return D;
}

/// A vector file holds one value per line (a single CSV column) or one row.
inline Vector read_vector(const std::string& path, const CsvOptions& opt = {}) {
  Matrix M = read_csv(path, opt);
  if (M.cols() == 1) return M.col(0);
  if (M.rows() == 1) return M.row(0).transpose();
  throw DataError(path + ": expected a single row or column of values");
}

inline std::string format_csv(const Matrix& M, bool integers = false) {
  std::string out;
  for (Index i = 0; i < M.rows(); ++i) {
    for (Index j = 0; j < M.cols(); ++j) {
      if (j) out += ',';
      if (integers)
        out += std::to_string(static_cast<long long>(M(i, j)));
      else
        out += format_real(M(i, j));
    }
    out += '\n';
  }
  return out;
}

inline void write_csv(const std::string& path, const Matrix& M, bool integers = false) {
  write_text(path, format_csv(M, integers));
}

inline void write_vector(const std::string& path, const Vector& v) {
  write_text(path, format_csv(Matrix(v)));
}

struct ModelMetadata {
  std::string method;
  long iterations = 0;
  double objective = 0.0;
  std::string objective_kind = "regularized";  // or "data_fit" for full-rank fits
  std::uint64_t seed = 0;
  double eps_rel = 0.0;
  double eps_abs = 0.0;
  std::string termination;
};

struct ModelFile {
  ElasticityModel model;
  double lambda = 0.0;
  ModelMetadata metadata;
};

namespace detail {

inline nlohmann::json row_major(const Matrix& M) {
  nlohmann::json a = nlohmann::json::array();
  for (Index i = 0; i < M.rows(); ++i)
    for (Index j = 0; j < M.cols(); ++j) a.push_back(M(i, j));
  return a;
}

inline nlohmann::json to_array(const Vector& v) {
  nlohmann::json a = nlohmann::json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

inline Matrix matrix_from(const nlohmann::json& a, Index rows, Index cols, const char* name) {
  if (!a.is_array() || a.size() != static_cast<std::size_t>(rows * cols)) {
    throw DataError(std::string("model field '") + name + "' must hold " +
                    std::to_string(rows * cols) + " numbers");
  }
  Matrix M(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) M(i, j) = a.at(static_cast<std::size_t>(i * cols + j)).get<double>();
  return M;
}

}  // namespace detail

inline nlohmann::json to_json(const ModelFile& mf) {
  const auto& m = mf.model;
  nlohmann::json j;
  j["schema_version"] = kModelSchemaVersion;
  j["n"] = m.products();
  j["r"] = m.rank();
  j["lambda"] = mf.lambda;
  j["B"] = detail::row_major(m.B);
  j["C"] = detail::row_major(m.C);
  j["s"] = detail::to_array(m.s);
  j["log_d_nom"] = detail::to_array(m.log_d_nom);
  j["metadata"] = {{"method", mf.metadata.method},
                   {"iterations", mf.metadata.iterations},
                   {"objective", mf.metadata.objective},
                   {"objective_kind", mf.metadata.objective_kind},
                   {"seed", mf.metadata.seed},
                   {"eps_rel", mf.metadata.eps_rel},
                   {"eps_abs", mf.metadata.eps_abs},
                   {"termination", mf.metadata.termination}};
  return j;
}

inline ModelFile model_from_json(const nlohmann::json& j) {
  try {
    if (j.at("schema_version").get<int>() != kModelSchemaVersion) {
      throw DataError("unsupported model schema_version");
    }
    const Index n = j.at("n").get<Index>();
    const Index r = j.at("r").get<Index>();
    if (n < 1 || r < 1) throw DataError("model dimensions must be positive");
    ModelFile mf;
    mf.lambda = j.at("lambda").get<double>();
    mf.model.B = detail::matrix_from(j.at("B"), n, r, "B");
    mf.model.C = detail::matrix_from(j.at("C"), n, r, "C");
    mf.model.s = detail::matrix_from(j.at("s"), n, 1, "s");
    mf.model.log_d_nom = detail::matrix_from(j.at("log_d_nom"), n, 1, "log_d_nom");
    if (j.contains("metadata")) {
      const auto& md = j.at("metadata");
      mf.metadata.method = md.value("method", "");
      mf.metadata.iterations = md.value("iterations", 0L);
      mf.metadata.objective = md.value("objective", 0.0);
      mf.metadata.objective_kind = md.value("objective_kind", "regularized");
      mf.metadata.seed = md.value("seed", std::uint64_t{0});
      mf.metadata.eps_rel = md.value("eps_rel", 0.0);
      mf.metadata.eps_abs = md.value("eps_abs", 0.0);
      mf.metadata.termination = md.value("termination", "");
    }
    mf.model.validate();
    return mf;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed model file: ") + e.what());
  }
}

inline void save_model(const std::string& path, const ModelFile& mf) {
  write_text(path, to_json(mf).dump(2) + "\n");
}

inline ModelFile load_model(const std::string& path) {
  const std::string text = read_text(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + ": " + e.what());
  }
  try {
    return model_from_json(j);
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

}  // namespace elastifit::io
