#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <ostream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "coxbar/error.hpp"
#include "coxbar/survival_data.hpp"

namespace coxbar {

enum class DesignFormat { dense_csv, sparse_coord };

inline DesignFormat parse_design_format(std::string_view s) {
  if (s == "dense-csv" || s == "dense") return DesignFormat::dense_csv;
  if (s == "sparse-coord" || s == "coord" || s == "sparse") return DesignFormat::sparse_coord;
  throw InputError("unknown design format '" + std::string(s) + "'");
}

inline std::string to_string(DesignFormat f) {
  return f == DesignFormat::dense_csv ? "dense-csv" : "sparse-coord";
}

/// Shortest decimal text that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

/// Decimal text with `digits` significant digits.
inline std::string format_double(double v, int digits) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, digits);
  return std::string(buf, res.ptr);
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == sep) {
      out.push_back(trim(s.substr(start, i - start)));
      start = i + 1;
    }
  }
  return out;
}

inline std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t' && s[j] != '\r') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

inline bool parse_number(std::string_view tok, double& out) {
  if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
  auto res = std::from_chars(tok.data(), tok.data() + tok.size(), out);
  return res.ec == std::errc{} && res.ptr == tok.data() + tok.size();
}

inline bool parse_count(std::string_view tok, std::size_t& out) {
  auto res = std::from_chars(tok.data(), tok.data() + tok.size(), out);
  return res.ec == std::errc{} && res.ptr == tok.data() + tok.size();
}

class LineReader {
 public:
  explicit LineReader(const std::string& path) : path_(path), in_(path) {
    if (!in_) throw InputError(path + ": cannot open file");
  }
  /// Next non-blank line; false at end of file.
  bool next(std::string_view& line) {
    while (std::getline(in_, buf_)) {
      ++line_no_;
      line = trim(buf_);
      if (!line.empty()) return true;
    }
    return false;
  }
  [[noreturn]] void fail(const std::string& msg) const { throw InputError(path_, line_no_, msg); }
  std::size_t line() const noexcept { return line_no_; }

 private:
  std::string path_;
  std::ifstream in_;
  std::string buf_;
  std::size_t line_no_ = 0;
};

}  // namespace detail

struct SurvivalTable {
  std::vector<std::string> ids;
  std::vector<double> time;
  std::vector<std::uint8_t> status;
};

/// Reads `id,time,status` rows.
inline SurvivalTable read_survival_csv(const std::string& path) {
  detail::LineReader reader(path);
  std::string_view line;
  if (!reader.next(line)) reader.fail("empty survival file");
  auto header = detail::split(line, ',');
  if (header.size() != 3 || header[0] != "id" || header[1] != "time" || header[2] != "status")
    reader.fail("expected header 'id,time,status'");
  SurvivalTable t;
  while (reader.next(line)) {
    auto f = detail::split(line, ',');
    if (f.size() != 3) reader.fail("expected 3 fields, found " + std::to_string(f.size()));
    double tm = 0.0, st = 0.0;
    if (!detail::parse_number(f[1], tm)) reader.fail("malformed time '" + std::string(f[1]) + "'");
    if (!detail::parse_number(f[2], st)) reader.fail("malformed status '" + std::string(f[2]) + "'");
    if (!(tm > 0.0) || !std::isfinite(tm)) reader.fail("nonpositive time");
    if (st != 0.0 && st != 1.0) reader.fail("status outside {0,1}");
    t.ids.emplace_back(f[0]);
    t.time.push_back(tm);
    t.status.push_back(static_cast<std::uint8_t>(st));
  }
  if (t.time.empty()) reader.fail("survival file has no rows");
  return t;
}

/// Guesses the design format from the first line: dense CSV starts with `id`.
inline DesignFormat detect_design_format(const std::string& path) {
  detail::LineReader reader(path);
  std::string_view line;
  if (!reader.next(line)) reader.fail("empty design file");
  return line.substr(0, 2) == "id" ? DesignFormat::dense_csv : DesignFormat::sparse_coord;
}

namespace detail {

inline std::vector<ColumnInput> read_dense_design(const std::string& path, const SurvivalTable& surv) {
  LineReader reader(path);
  std::string_view line;
  if (!reader.next(line)) reader.fail("empty design file");
  auto header = split(line, ',');
  if (header.empty() || header[0] != "id") reader.fail("expected header 'id,x1..xp'");
  const std::size_t p = header.size() - 1;
  std::vector<ColumnInput> cols(p);
  std::size_t row = 0;
  while (reader.next(line)) {
    auto f = split(line, ',');
    if (f.size() != p + 1)
      reader.fail("expected " + std::to_string(p + 1) + " fields, found " + std::to_string(f.size()));
    if (row >= surv.ids.size()) reader.fail("more design rows than survival rows");
    if (f[0] != surv.ids[row])
      reader.fail("id '" + std::string(f[0]) + "' does not match survival id '" + surv.ids[row] + "'");
    for (std::size_t j = 0; j < p; ++j) {
      double v = 0.0;
      if (!parse_number(f[j + 1], v) || !std::isfinite(v))
        reader.fail("malformed value '" + std::string(f[j + 1]) + "' in column x" + std::to_string(j + 1));
      if (v != 0.0) {
        cols[j].rows.push_back(row);
        cols[j].values.push_back(v);
      }
    }
    ++row;
  }
  if (row != surv.ids.size())
    reader.fail("design has " + std::to_string(row) + " rows, survival file has " +
                std::to_string(surv.ids.size()));
  return cols;
}

inline std::vector<ColumnInput> read_sparse_design(const std::string& path, const SurvivalTable& surv) {
  LineReader reader(path);
  std::string_view line;
  if (!reader.next(line)) reader.fail("empty design file");
  auto head = split_ws(line);
  std::size_t n = 0, p = 0, nnz = 0;
  if (head.size() != 3 || !parse_count(head[0], n) || !parse_count(head[1], p) || !parse_count(head[2], nnz))
    reader.fail("expected header 'n p nnz'");
  if (n != surv.ids.size())
    reader.fail("header declares n=" + std::to_string(n) + " but survival file has " +
                std::to_string(surv.ids.size()) + " rows");
  std::vector<ColumnInput> cols(p);
  std::vector<std::vector<std::size_t>> lines(p);
  std::size_t count = 0;
  while (reader.next(line)) {
    auto f = split_ws(line);
    std::size_t r = 0, c = 0;
    double v = 0.0;
    if (f.size() != 3 || !parse_count(f[0], r) || !parse_count(f[1], c) || !parse_number(f[2], v))
      reader.fail("expected 'row col value'");
    if (r < 1 || r > n) reader.fail("row index " + std::to_string(r) + " out of range 1.." + std::to_string(n));
    if (c < 1 || c > p) reader.fail("column index " + std::to_string(c) + " out of range 1.." + std::to_string(p));
    if (!std::isfinite(v)) reader.fail("non-finite value");
    if (++count > nnz) reader.fail("more entries than the declared nnz=" + std::to_string(nnz));
    cols[c - 1].rows.push_back(r - 1);
    cols[c - 1].values.push_back(v);
    lines[c - 1].push_back(reader.line());
  }
  if (count != nnz)
    reader.fail("found " + std::to_string(count) + " entries, header declares nnz=" + std::to_string(nnz));
  // duplicates are reported here so the message can carry the offending line
  std::vector<std::size_t> last(n, static_cast<std::size_t>(-1));
  for (std::size_t j = 0; j < p; ++j) {
    for (std::size_t e = 0; e < cols[j].rows.size(); ++e) {
      const std::size_t r = cols[j].rows[e];
      if (last[r] == j)
        throw InputError(path, lines[j][e], "duplicate entry for row " + std::to_string(r + 1) +
                                                " column " + std::to_string(j + 1));
      last[r] = j;
    }
  }
  return cols;
}

}  // namespace detail

/// Loads survival outcomes and a design file into a validated, sorted dataset.
/// Sparse-coord input is never materialized densely.
inline SurvivalDataset load_dataset(const std::string& survival_file, const std::string& design_file,
                                    DesignFormat format) {
  auto surv = read_survival_csv(survival_file);
  auto cols = format == DesignFormat::dense_csv ? detail::read_dense_design(design_file, surv)
                                                : detail::read_sparse_design(design_file, surv);
  return build_dataset(std::move(surv.time), std::move(surv.status), std::move(cols));
}

inline SurvivalDataset load_dataset(const std::string& survival_file, const std::string& design_file) {
  return load_dataset(survival_file, design_file, detect_design_format(design_file));
}

/// Canonical survival CSV; ids are 1..n in input order.
inline void write_survival_csv(std::ostream& out, const SurvivalDataset& ds) {
  out << "id,time,status\n";
  for (std::size_t i = 0; i < ds.n; ++i)
    out << (i + 1) << ',' << format_double(ds.time[i]) << ',' << int(ds.status[i]) << '\n';
}

/// Canonical sparse-coord text: raw values, column-major, rows ascending.
inline void write_sparse_design(std::ostream& out, const SurvivalDataset& ds) {
  out << ds.n << ' ' << ds.p << ' ' << ds.design.nnz() << '\n';
  std::vector<std::pair<std::size_t, double>> entries;
  for (std::size_t j = 0; j < ds.p; ++j) {
    const auto& col = ds.design.column(j);
    entries.clear();
    for (std::size_t e = 0; e < col.nnz(); ++e) entries.emplace_back(ds.order[col.pos[e]], col.value[e]);
    std::sort(entries.begin(), entries.end());
    for (const auto& [row, v] : entries) out << (row + 1) << ' ' << (j + 1) << ' ' << format_double(v) << '\n';
  }
}

/// Canonical dense CSV of raw values.
inline void write_dense_design(std::ostream& out, const SurvivalDataset& ds) {
  out << "id";
  for (std::size_t j = 0; j < ds.p; ++j) out << ",x" << (j + 1);
  out << '\n';
  std::vector<double> row_major(ds.n * ds.p, 0.0);
  for (std::size_t j = 0; j < ds.p; ++j) {
    const auto& col = ds.design.column(j);
    for (std::size_t e = 0; e < col.nnz(); ++e) row_major[ds.order[col.pos[e]] * ds.p + j] = col.value[e];
  }
  for (std::size_t i = 0; i < ds.n; ++i) {
    out << (i + 1);
    for (std::size_t j = 0; j < ds.p; ++j) out << ',' << format_double(row_major[i * ds.p + j]);
    out << '\n';
  }
}

inline void save_dataset(const SurvivalDataset& ds, const std::string& survival_file,
                         const std::string& design_file, DesignFormat format) {
  std::ofstream s(survival_file, std::ios::binary);
  if (!s) throw InputError(survival_file + ": cannot open for writing");
  write_survival_csv(s, ds);
  std::ofstream d(design_file, std::ios::binary);
  if (!d) throw InputError(design_file + ": cannot open for writing");
  if (format == DesignFormat::dense_csv)
    write_dense_design(d, ds);
  else
    write_sparse_design(d, ds);
  if (!s || !d) throw InputError("write failed for " + survival_file + " / " + design_file);
}

}  // namespace coxbar
