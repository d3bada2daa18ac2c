#pragma once

// Panel container, CSV ingestion and row-wise sample splitting.
//
// Orientation is fixed throughout the library: rows are features (or time
// periods), columns are units. Indices are 0-based in the C++ API and 1-based
// in every file the library reads or writes.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "lpca/error.hpp"

namespace lpca {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;
using IndexList = std::vector<Index>;

/// p x n panel of observations with an observation mask (true = observed).
/// Missing cells hold 0 in `values` once `mask_to_zero` has been applied;
/// `load_csv` and every mask-producing operation in the library already do so.
struct DataMatrix {
  Matrix values;
  Mask mask;

  DataMatrix() = default;
  explicit DataMatrix(Matrix v) : values(std::move(v)), mask(Mask::Constant(values.rows(), values.cols(), true)) {}
  DataMatrix(Matrix v, Mask m) : values(std::move(v)), mask(std::move(m)) {
    detail::require(values.rows() == mask.rows() && values.cols() == mask.cols(),
                    "values and mask must share dimensions");
  }

  Index p() const { return values.rows(); }
  Index n() const { return values.cols(); }
  bool all_observed() const { return mask.all(); }
  Index missing_count() const { return values.size() - mask.count(); }

  friend bool operator==(const DataMatrix& a, const DataMatrix& b) {
    return a.values.rows() == b.values.rows() && a.values.cols() == b.values.cols() &&
           a.values == b.values && (a.mask == b.mask).all();
  }
};

/// Disjoint feature-index sets: `dagger` for matching, `ddagger` for PCA and an
/// optional `wr` third portion used by covariate adjustment.
struct RowSplit {
  IndexList dagger;
  IndexList ddagger;
  IndexList wr;

  bool three_way() const { return !wr.empty(); }
  friend bool operator==(const RowSplit&, const RowSplit&) = default;
};

enum class SplitMode { Contiguous, Random };

struct CsvOptions {
  std::string missing_token = "NA";
  bool header = false;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    auto pos = line.find(',', start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline bool parse_double(std::string_view s, double& out) {
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

/// Formats with `digits` significant digits, or the shortest exact
/// round-trip representation when `digits` is 0.
inline std::string format_double(double x, int digits) {
  char buf[64];
  std::to_chars_result r;
  if (digits <= 0)
    r = std::to_chars(buf, buf + sizeof buf, x);
  else
    r = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general, digits);
  std::string s(buf, r.ptr);
  if (s == "-0") s = "0";
  return s;
}

}  // namespace detail

/// Parses a comma-separated table from a stream. Rows of the table are
/// features. Cells equal to the missing token become masked zeros.
inline DataMatrix parse_csv(std::istream& in, const CsvOptions& opt = {}) {
  std::vector<std::vector<double>> rows;
  std::vector<std::vector<bool>> observed;
  std::string line;
  std::size_t line_no = 0;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (opt.header && line_no == 1) continue;
    if (detail::trim(line).empty()) continue;
    auto fields = detail::split_fields(line);
    if (rows.empty()) width = fields.size();
    if (fields.size() != width)
      throw DataError("ragged row " + std::to_string(line_no) + ": expected " + std::to_string(width) +
                      " fields, found " + std::to_string(fields.size()));
    std::vector<double> vals(width, 0.0);
    std::vector<bool> obs(width, true);
    for (std::size_t c = 0; c < width; ++c) {
      if (fields[c] == opt.missing_token) {
        obs[c] = false;
        continue;
      }
      if (!detail::parse_double(fields[c], vals[c]))
        throw DataError("non-numeric cell at row " + std::to_string(line_no) + ", column " + std::to_string(c + 1) +
                        ": '" + std::string(fields[c]) + "'");
    }
    rows.push_back(std::move(vals));
    observed.push_back(std::move(obs));
  }
  if (rows.empty()) throw DataError("empty table");
  const auto p = static_cast<Index>(rows.size());
  const auto n = static_cast<Index>(width);
  Matrix values(p, n);
  Mask mask(p, n);
  for (Index l = 0; l < p; ++l)
    for (Index i = 0; i < n; ++i) {
      values(l, i) = rows[l][i];
      mask(l, i) = observed[l][i];
    }
  return DataMatrix(std::move(values), std::move(mask));
}

inline DataMatrix load_csv(const std::string& path, const CsvOptions& opt = {}) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open input file: " + path);
  return parse_csv(in, opt);
}

/// Writes a plain numeric table, 12 significant digits by default.
inline void write_matrix_csv(std::ostream& out, const Matrix& m, int digits = 12) {
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) {
      if (c) out << ',';
      out << detail::format_double(m(r, c), digits);
    }
    out << '\n';
  }
}

inline void write_csv(std::ostream& out, const DataMatrix& x, const CsvOptions& opt = {}, int digits = 12) {
  for (Index r = 0; r < x.p(); ++r) {
    for (Index c = 0; c < x.n(); ++c) {
      if (c) out << ',';
      if (x.mask(r, c))
        out << detail::format_double(x.values(r, c), digits);
      else
        out << opt.missing_token;
    }
    out << '\n';
  }
}

inline void save_matrix_csv(const std::string& path, const Matrix& m, int digits = 12) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write file: " + path);
  write_matrix_csv(out, m, digits);
}

/// Sets every unobserved cell to 0; the mask is left untouched.
inline DataMatrix mask_to_zero(DataMatrix x) {
  for (Index i = 0; i < x.n(); ++i)
    for (Index l = 0; l < x.p(); ++l)
      if (!x.mask(l, i)) x.values(l, i) = 0.0;
  return x;
}

/// x_li - rowmean_l - colmean_i + grandmean. Requires a fully observed panel.
inline Matrix double_demean(const Matrix& x) {
  const Vector row_mean = x.rowwise().mean();
  const Eigen::RowVectorXd col_mean = x.colwise().mean();
  const double grand = x.mean();
  Matrix out = x;
  out.colwise() -= row_mean;
  out.rowwise() -= col_mean;
  out.array() += grand;
  return out;
}

inline Matrix double_demean(const DataMatrix& x) {
  if (!x.all_observed()) throw ContractError("double_demean requires a fully observed matrix");
  return double_demean(x.values);
}

/// Partitions [0, p) into two or three blocks of sizes ceil(f_k * p) in order,
/// the last block taking the remainder. Random mode shuffles with the seed
/// first; every block is returned sorted.
inline RowSplit row_split(Index p, std::span<const double> fractions, SplitMode mode = SplitMode::Contiguous,
                          std::uint64_t seed = 0) {
  if (fractions.size() != 2 && fractions.size() != 3)
    throw ConfigError("split needs 2 or 3 fractions, got " + std::to_string(fractions.size()));
  double sum = 0.0;
  for (double f : fractions) {
    if (!(f > 0.0)) throw ConfigError("split fractions must be positive");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("split fractions must sum to 1");
  if (p < static_cast<Index>(fractions.size())) throw ConfigError("too few rows to split");

  IndexList order(static_cast<std::size_t>(p));
  std::iota(order.begin(), order.end(), Index{0});
  if (mode == SplitMode::Random) {
    std::mt19937_64 gen(seed);
    std::shuffle(order.begin(), order.end(), gen);
  }

  auto block = [&](double f, Index remaining) {
    auto size = static_cast<Index>(std::ceil(f * static_cast<double>(p) - 1e-9));
    return std::clamp<Index>(size, 0, remaining);
  };
  std::vector<Index> sizes;
  Index used = 0;
  for (std::size_t k = 0; k + 1 < fractions.size(); ++k) {
    sizes.push_back(block(fractions[k], p - used));
    used += sizes.back();
  }
  sizes.push_back(p - used);

  std::vector<IndexList> sets(3);
  auto it = order.begin();
  for (std::size_t k = 0; k < sizes.size(); ++k) {
    if (sizes[k] == 0) throw ConfigError("split block " + std::to_string(k + 1) + " is empty");
    sets[k].assign(it, it + sizes[k]);
    std::sort(sets[k].begin(), sets[k].end());
    it += sizes[k];
  }
  return RowSplit{std::move(sets[0]), std::move(sets[1]), std::move(sets[2])};
}

/// Contiguous split that sends the first `match_rows` rows to matching.
inline RowSplit leading_split(Index p, Index match_rows) {
  if (match_rows < 1 || match_rows >= p) throw ConfigError("matching rows must lie in [1, p-1]");
  RowSplit s;
  s.dagger.resize(static_cast<std::size_t>(match_rows));
  s.ddagger.resize(static_cast<std::size_t>(p - match_rows));
  std::iota(s.dagger.begin(), s.dagger.end(), Index{0});
  std::iota(s.ddagger.begin(), s.ddagger.end(), match_rows);
  return s;
}

inline Matrix select_rows(const Matrix& m, const IndexList& rows) { return m(rows, Eigen::all); }

// Split files: one line per block, "<name> <1-based indices...>".
inline void write_split(std::ostream& out, const RowSplit& s) {
  auto line = [&](const char* name, const IndexList& idx) {
    out << name;
    for (Index l : idx) out << ' ' << (l + 1);
    out << '\n';
  };
  line("dagger", s.dagger);
  line("ddagger", s.ddagger);
  if (s.three_way()) line("wr", s.wr);
}

inline RowSplit read_split(std::istream& in) {
  RowSplit s;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string name;
    if (!(ls >> name)) continue;
    IndexList* target = name == "dagger" ? &s.dagger : name == "ddagger" ? &s.ddagger : name == "wr" ? &s.wr : nullptr;
    if (!target) throw DataError("unknown split block '" + name + "'");
    long long v;
    while (ls >> v) {
      if (v < 1) throw DataError("split indices are 1-based");
      target->push_back(static_cast<Index>(v - 1));
    }
  }
  if (s.dagger.empty() || s.ddagger.empty()) throw DataError("split file must list dagger and ddagger rows");
  return s;
}

}  // namespace lpca
