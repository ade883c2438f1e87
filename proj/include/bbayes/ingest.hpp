#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "bbayes/error.hpp"

namespace bbayes {

/// A numeric cell; `std::nullopt` is the MISSING marker.
using Cell = std::optional<double>;

/// Parsed tabular data, row-major. Column names are unique.
class RawTable {
 public:
  RawTable() = default;

  explicit RawTable(std::vector<std::string> column_names) : names_(std::move(column_names)) {
    std::set<std::string> seen;
    for (const auto& n : names_) {
      if (!seen.insert(n).second) {
        throw Error(Errc::MalformedHeader, "duplicate column name '" + n + "'");
      }
    }
  }

  std::size_t n_rows() const noexcept { return names_.empty() ? 0 : cells_.size() / names_.size(); }
  std::size_t n_cols() const noexcept { return names_.size(); }
  const std::vector<std::string>& column_names() const noexcept { return names_; }

  const Cell& cell(std::size_t row, std::size_t col) const { return cells_[row * names_.size() + col]; }
  Cell& cell(std::size_t row, std::size_t col) { return cells_[row * names_.size() + col]; }

  void append_row(std::vector<Cell> row) {
    if (row.size() != names_.size()) {
      throw Error(Errc::ArityMismatch, "row has " + std::to_string(row.size()) + " cells, expected " +
                                           std::to_string(names_.size()));
    }
    cells_.insert(cells_.end(), row.begin(), row.end());
  }

  std::optional<std::size_t> column_index(std::string_view name) const {
    auto it = std::find(names_.begin(), names_.end(), name);
    if (it == names_.end()) return std::nullopt;
    return static_cast<std::size_t>(it - names_.begin());
  }

  std::size_t missing_count() const {
    return static_cast<std::size_t>(
        std::count_if(cells_.begin(), cells_.end(), [](const Cell& c) { return !c.has_value(); }));
  }

  friend bool operator==(const RawTable&, const RawTable&) = default;

 private:
  std::vector<std::string> names_;
  std::vector<Cell> cells_;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\n\f\v";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

inline std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

inline bool iequals_prefix(std::string_view s, std::string_view prefix) {
  if (s.size() < prefix.size()) return false;
  return to_lower(s.substr(0, prefix.size())) == prefix;
}

inline std::string_view unquote(std::string_view s) {
  if (s.size() >= 2 && (s.front() == '\'' || s.front() == '"') && s.back() == s.front()) {
    return s.substr(1, s.size() - 2);
  }
  return s;
}

inline std::optional<double> parse_double(std::string_view token) {
  if (token.empty()) return std::nullopt;
  if (token.front() == '+') token.remove_prefix(1);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size()) return std::nullopt;
  return value;
}

/// Shortest representation that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

/// Splits on '\n', dropping a trailing '\r' from each line.
inline std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    start = end + 1;
  }
  if (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

inline std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto end = line.find(',', start);
    if (end == std::string_view::npos) {
      out.push_back(trim(line.substr(start)));
      break;
    }
    out.push_back(trim(line.substr(start, end - start)));
    start = end + 1;
  }
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// ARFF
// ---------------------------------------------------------------------------

/// Parses the numeric ARFF subset: numeric/real/integer attributes plus binary
/// nominal attributes `{0,1}` (coerced to 0.0/1.0). `?` is MISSING, `%` starts
/// a comment, keywords are case-insensitive. Sparse data rows are rejected.
inline RawTable parse_arff(std::string_view text) {
  const auto lines = detail::split_lines(text);
  bool seen_relation = false;
  bool in_data = false;
  std::vector<std::string> names;
  std::vector<bool> binary;
  RawTable table;

  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    std::string_view line = lines[i];
    if (auto pct = line.find('%'); pct != std::string_view::npos) line = line.substr(0, pct);
    line = detail::trim(line);
    if (line.empty()) continue;

    if (!in_data) {
      if (detail::iequals_prefix(line, "@relation")) {
        seen_relation = true;
        continue;
      }
      if (detail::iequals_prefix(line, "@attribute")) {
        if (!seen_relation) {
          throw ParseError(Errc::MalformedHeader, line_no, 0, "@attribute before @relation");
        }
        std::string_view rest = detail::trim(line.substr(10));
        std::string_view name;
        if (!rest.empty() && (rest.front() == '\'' || rest.front() == '"')) {
          auto close = rest.find(rest.front(), 1);
          if (close == std::string_view::npos) {
            throw ParseError(Errc::MalformedHeader, line_no, 0, "unterminated attribute name");
          }
          name = rest.substr(1, close - 1);
          rest = detail::trim(rest.substr(close + 1));
        } else {
          auto sp = rest.find_first_of(" \t");
          if (sp == std::string_view::npos) {
            throw ParseError(Errc::MalformedHeader, line_no, 0, "attribute without type");
          }
          name = rest.substr(0, sp);
          rest = detail::trim(rest.substr(sp));
        }
        const std::string type = detail::to_lower(rest);
        if (type == "numeric" || type == "real" || type == "integer") {
          binary.push_back(false);
        } else if (!type.empty() && type.front() == '{' && type.back() == '}') {
          std::set<std::string> values;
          for (auto v : detail::split_commas(std::string_view(type).substr(1, type.size() - 2))) {
            values.insert(std::string(detail::unquote(v)));
          }
          if (values != std::set<std::string>{"0", "1"}) {
            throw ParseError(Errc::UnsupportedAttributeType, line_no, 0,
                             "nominal attribute '" + std::string(name) + "' must be {0,1}");
          }
          binary.push_back(true);
        } else {
          throw ParseError(Errc::UnsupportedAttributeType, line_no, 0,
                           "attribute '" + std::string(name) + "' has type '" + std::string(rest) + "'");
        }
        names.emplace_back(name);
        continue;
      }
      if (detail::iequals_prefix(line, "@data")) {
        if (!seen_relation) throw ParseError(Errc::MalformedHeader, line_no, 0, "@data before @relation");
        if (names.empty()) throw ParseError(Errc::MalformedHeader, line_no, 0, "no attributes declared");
        try {
          table = RawTable(names);
        } catch (const Error& e) {
          throw ParseError(Errc::MalformedHeader, line_no, 0, e.message());
        }
        in_data = true;
        continue;
      }
      throw ParseError(Errc::MalformedHeader, line_no, 0, "unexpected header line '" + std::string(line) + "'");
    }

    if (line.front() == '{') {
      throw ParseError(Errc::UnsupportedAttributeType, line_no, 0, "sparse ARFF rows are not supported");
    }
    const auto tokens = detail::split_commas(line);
    if (tokens.size() != names.size()) {
      throw ParseError(Errc::ArityMismatch, line_no, 0,
                       std::to_string(tokens.size()) + " cells, expected " + std::to_string(names.size()));
    }
    std::vector<Cell> row;
    row.reserve(tokens.size());
    for (std::size_t c = 0; c < tokens.size(); ++c) {
      const auto tok = binary[c] ? detail::unquote(tokens[c]) : tokens[c];
      if (tok == "?") {
        row.emplace_back(std::nullopt);
        continue;
      }
      auto v = detail::parse_double(tok);
      if (!v || !std::isfinite(*v) || (binary[c] && *v != 0.0 && *v != 1.0)) {
        throw ParseError(Errc::NonNumericCell, line_no, c + 1,
                         "cannot parse '" + std::string(tok) + "' for attribute '" + names[c] + "'");
      }
      row.emplace_back(*v);
    }
    table.append_row(std::move(row));
  }

  if (!seen_relation) throw ParseError(Errc::MalformedHeader, lines.size(), 0, "missing @relation");
  if (!in_data) throw ParseError(Errc::MalformedHeader, lines.size(), 0, "missing @data");
  return table;
}

/// Serializes a table as ARFF. Columns named in `binary_columns` are declared `{0,1}`.
inline std::string write_arff(const RawTable& table, std::string_view relation,
                              const std::vector<std::string>& binary_columns = {}) {
  std::string out = "@relation " + std::string(relation) + "\n\n";
  for (const auto& name : table.column_names()) {
    const bool is_binary =
        std::find(binary_columns.begin(), binary_columns.end(), name) != binary_columns.end();
    out += "@attribute " + name + (is_binary ? " {0,1}\n" : " numeric\n");
  }
  out += "\n@data\n";
  for (std::size_t r = 0; r < table.n_rows(); ++r) {
    for (std::size_t c = 0; c < table.n_cols(); ++c) {
      if (c) out += ',';
      const auto& cell = table.cell(r, c);
      out += cell ? detail::format_double(*cell) : "?";
    }
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

/// Comma-separated numeric cells; empty or `?` is MISSING. Blank lines are
/// skipped. Without a header the columns are named col0..colN-1.
inline RawTable parse_csv(std::string_view text, bool has_header) {
  const auto lines = detail::split_lines(text);
  RawTable table;
  bool initialized = false;
  std::size_t width = 0;

  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    if (detail::trim(lines[i]).empty()) continue;
    const auto tokens = detail::split_commas(lines[i]);

    if (!initialized) {
      width = tokens.size();
      std::vector<std::string> names;
      if (has_header) {
        for (auto t : tokens) names.emplace_back(detail::unquote(t));
      } else {
        for (std::size_t c = 0; c < width; ++c) names.push_back("col" + std::to_string(c));
      }
      try {
        table = RawTable(std::move(names));
      } catch (const Error& e) {
        throw ParseError(Errc::MalformedHeader, line_no, 0, e.message());
      }
      initialized = true;
      if (has_header) continue;
    }

    if (tokens.size() != width) {
      throw ParseError(Errc::ArityMismatch, line_no, 0,
                       std::to_string(tokens.size()) + " cells, expected " + std::to_string(width));
    }
    std::vector<Cell> row;
    row.reserve(width);
    for (std::size_t c = 0; c < width; ++c) {
      const auto tok = tokens[c];
      if (tok.empty() || tok == "?") {
        row.emplace_back(std::nullopt);
        continue;
      }
      auto v = detail::parse_double(tok);
      if (!v || !std::isfinite(*v)) {
        throw ParseError(Errc::NonNumericCell, line_no, c + 1, "cannot parse '" + std::string(tok) + "'");
      }
      row.emplace_back(*v);
    }
    table.append_row(std::move(row));
  }
  return table;
}

/// Writes a header row followed by data; MISSING is written as `?`.
inline std::string write_csv(const RawTable& table, bool with_header = true) {
  std::string out;
  if (with_header) {
    for (std::size_t c = 0; c < table.n_cols(); ++c) {
      if (c) out += ',';
      out += table.column_names()[c];
    }
    out += '\n';
  }
  for (std::size_t r = 0; r < table.n_rows(); ++r) {
    for (std::size_t c = 0; c < table.n_cols(); ++c) {
      if (c) out += ',';
      const auto& cell = table.cell(r, c);
      out += cell ? detail::format_double(*cell) : "?";
    }
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Missing values
// ---------------------------------------------------------------------------

enum class ImputeStrategy { median, mean, drop_rows };

inline std::string_view to_string(ImputeStrategy s) {
  switch (s) {
    case ImputeStrategy::median: return "median";
    case ImputeStrategy::mean: return "mean";
    case ImputeStrategy::drop_rows: return "drop_rows";
  }
  return "?";
}

inline ImputeStrategy parse_impute_strategy(std::string_view s) {
  if (s == "median") return ImputeStrategy::median;
  if (s == "mean") return ImputeStrategy::mean;
  if (s == "drop_rows") return ImputeStrategy::drop_rows;
  throw Error(Errc::InvalidArgument, "unknown imputation strategy '" + std::string(s) + "'");
}

struct ImputationStats {
  ImputeStrategy strategy = ImputeStrategy::median;
  /// NaN for columns without any observed value in the fitting data.
  std::vector<double> per_column_fill;
  std::size_t n_cells_imputed = 0;
  std::size_t n_rows_dropped = 0;
};

namespace detail {

inline double median_of(std::vector<double> v) {
  const std::size_t n = v.size();
  const std::size_t mid = n / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double upper = v[mid];
  if (n % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

}  // namespace detail

/// Fills or drops MISSING cells. With `fit_stats`, its fill values (and
/// strategy) are reused, which is how held-out data gets training medians.
inline std::pair<RawTable, ImputationStats> impute_missing(
    const RawTable& table, ImputeStrategy strategy,
    const std::optional<ImputationStats>& fit_stats = std::nullopt) {
  ImputationStats stats;
  stats.strategy = fit_stats ? fit_stats->strategy : strategy;

  const std::size_t rows = table.n_rows();
  const std::size_t cols = table.n_cols();

  if (fit_stats) {
    if (fit_stats->per_column_fill.size() != cols) {
      throw Error(Errc::DimensionMismatch, "imputation stats cover " +
                                               std::to_string(fit_stats->per_column_fill.size()) +
                                               " columns, table has " + std::to_string(cols));
    }
    stats.per_column_fill = fit_stats->per_column_fill;
  } else {
    stats.per_column_fill.assign(cols, std::numeric_limits<double>::quiet_NaN());
    for (std::size_t c = 0; c < cols; ++c) {
      std::vector<double> observed;
      observed.reserve(rows);
      for (std::size_t r = 0; r < rows; ++r) {
        if (const auto& cell = table.cell(r, c)) observed.push_back(*cell);
      }
      if (observed.empty()) continue;
      if (stats.strategy == ImputeStrategy::mean) {
        double sum = 0.0;
        for (double v : observed) sum += v;
        stats.per_column_fill[c] = sum / static_cast<double>(observed.size());
      } else {
        stats.per_column_fill[c] = detail::median_of(std::move(observed));
      }
    }
  }

  RawTable out(table.column_names());
  for (std::size_t r = 0; r < rows; ++r) {
    std::vector<Cell> row(cols);
    bool has_missing = false;
    for (std::size_t c = 0; c < cols; ++c) {
      row[c] = table.cell(r, c);
      if (!row[c]) has_missing = true;
    }
    if (has_missing && stats.strategy == ImputeStrategy::drop_rows) {
      ++stats.n_rows_dropped;
      continue;
    }
    if (has_missing) {
      for (std::size_t c = 0; c < cols; ++c) {
        if (row[c]) continue;
        const double fill = stats.per_column_fill[c];
        if (!std::isfinite(fill)) {
          throw Error(Errc::AllMissingColumn,
                      "column '" + table.column_names()[c] + "' has no observed value to impute from");
        }
        row[c] = fill;
        ++stats.n_cells_imputed;
      }
    }
    out.append_row(std::move(row));
  }

  if (rows > 0 && out.n_rows() == 0) {
    throw Error(Errc::EmptyResult, "dropping rows with missing cells removed all " + std::to_string(rows) + " rows");
  }
  return {std::move(out), std::move(stats)};
}

}  // namespace bbayes
