#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <istream>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "vflsim/error.hpp"
#include "vflsim/linalg/matrix.hpp"

namespace vflsim::data {

struct CsvSchema {
  std::string id_column = "id";
  std::optional<std::string> label_column;
  /// Empty means every column other than id and label, in file order.
  std::vector<std::string> feature_columns;
};

/// One party's rows as read from disk.
struct PartyTable {
  std::vector<std::string> ids;
  std::vector<std::string> feature_names;
  Matrix features;
  std::optional<Vector> labels;
};

namespace detail {

inline std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  for (auto& c : cells) {
    const auto b = c.find_first_not_of(" \t\r");
    const auto e = c.find_last_not_of(" \t\r");
    c = b == std::string::npos ? std::string() : c.substr(b, e - b + 1);
  }
  return cells;
}

inline double parse_number(const std::string& cell, const std::string& where) {
  double v = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  if (!cell.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (cell.empty() || ec != std::errc() || ptr != last || !std::isfinite(v)) {
    throw ParseError(where + ": non-numeric cell '" + cell + "'");
  }
  return v;
}

}  // namespace detail

inline PartyTable parse_csv(std::istream& in, const CsvSchema& schema,
                            const std::string& source = "<input>") {
  std::string line;
  std::size_t line_no = 0;
  auto where = [&] { return source + ":" + std::to_string(line_no); };

  // Header; a UTF-8 byte-order mark is tolerated.
  if (!std::getline(in, line)) throw ParseError(source + ": empty file");
  ++line_no;
  if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
  const auto header = detail::split_line(line);
  auto column_of = [&](const std::string& name) -> std::optional<std::size_t> {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) return std::nullopt;
    return static_cast<std::size_t>(it - header.begin());
  };
  const auto id_col = column_of(schema.id_column);
  if (!id_col) throw ParseError(where() + ": missing id column '" + schema.id_column + "'");
  std::optional<std::size_t> label_col;
  if (schema.label_column) {
    label_col = column_of(*schema.label_column);
    if (!label_col) {
      throw ParseError(where() + ": missing label column '" + *schema.label_column + "'");
    }
  }
  std::vector<std::size_t> feature_cols;
  PartyTable table;
  if (schema.feature_columns.empty()) {
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (c == *id_col || (label_col && c == *label_col)) continue;
      feature_cols.push_back(c);
      table.feature_names.push_back(header[c]);
    }
  } else {
    for (const auto& name : schema.feature_columns) {
      const auto c = column_of(name);
      if (!c) throw ParseError(where() + ": missing feature column '" + name + "'");
      feature_cols.push_back(*c);
      table.feature_names.push_back(name);
    }
  }

  std::vector<double> values;
  Vector labels;
  std::unordered_set<std::string> seen;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = detail::split_line(line);
    if (cells.size() != header.size()) {
      throw ParseError(where() + ": expected " + std::to_string(header.size()) + " cells, got " +
                       std::to_string(cells.size()));
    }
    const std::string& id = cells[*id_col];
    if (id.empty()) throw ParseError(where() + ": empty id");
    if (!seen.insert(id).second) throw ParseError(where() + ": duplicate id '" + id + "'");
    table.ids.push_back(id);
    for (std::size_t c : feature_cols) values.push_back(detail::parse_number(cells[c], where()));
    if (label_col) labels.push_back(detail::parse_number(cells[*label_col], where()));
  }
  table.features = Matrix(table.ids.size(), feature_cols.size());
  std::copy(values.begin(), values.end(), table.features.data().begin());
  if (label_col) table.labels = std::move(labels);
  return table;
}

inline PartyTable load_csv(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw ParseError(path + ": cannot open");
  return parse_csv(in, schema, path);
}

inline void write_csv(std::ostream& out, const PartyTable& t, const std::string& id_column = "id",
                      const std::string& label_column = "label") {
  vflsim::detail::require_shape(t.feature_names.size() == t.features.cols(),
                        "write_csv: feature names do not match matrix width");
  vflsim::detail::require_shape(t.ids.size() == t.features.rows(), "write_csv: ids do not match rows");
  out << id_column;
  if (t.labels) out << ',' << label_column;
  for (const auto& n : t.feature_names) out << ',' << n;
  out << '\n' << std::setprecision(17);
  for (std::size_t i = 0; i < t.ids.size(); ++i) {
    out << t.ids[i];
    if (t.labels) out << ',' << (*t.labels)[i];
    for (double v : t.features.row(i)) out << ',' << v;
    out << '\n';
  }
}

inline void save_csv(const std::string& path, const PartyTable& t,
                     const std::string& id_column = "id", const std::string& label_column = "label") {
  std::ofstream out(path);
  if (!out) throw ParseError(path + ": cannot open for writing");
  write_csv(out, t, id_column, label_column);
}

/// Every party must hold the same ids in the same order, and exactly one
/// (the first) must carry labels.
inline void check_alignment(std::span<const PartyTable> parties) {
  if (parties.empty()) throw AlignmentError("no parties");
  if (!parties[0].labels) throw AlignmentError("the guest table has no labels");
  for (std::size_t p = 1; p < parties.size(); ++p) {
    if (parties[p].labels) throw AlignmentError("party " + std::to_string(p) + " also has labels");
    if (parties[p].ids.size() != parties[0].ids.size()) {
      throw AlignmentError("party " + std::to_string(p) + " has " +
                           std::to_string(parties[p].ids.size()) + " rows, guest has " +
                           std::to_string(parties[0].ids.size()));
    }
    for (std::size_t i = 0; i < parties[0].ids.size(); ++i) {
      if (parties[p].ids[i] != parties[0].ids[i]) {
        throw AlignmentError("party " + std::to_string(p) + " row " + std::to_string(i + 1) +
                             " has id '" + parties[p].ids[i] + "', guest has '" +
                             parties[0].ids[i] + "'");
      }
    }
  }
}

struct VerticalDataset {
  std::vector<Matrix> parts;  ///< guest first, then hosts
  Vector y;                   ///< binary {0,1}, held by the guest
  std::vector<std::string> ids;
  /// column_order[j] is the original column placed at position j of the
  /// concatenated parts.
  std::vector<std::size_t> column_order;

  std::size_t rows() const { return y.size(); }
  std::size_t total_features() const {
    std::size_t n = 0;
    for (const auto& p : parts) n += p.cols();
    return n;
  }
  std::vector<std::size_t> feature_counts() const {
    std::vector<std::size_t> out;
    for (const auto& p : parts) out.push_back(p.cols());
    return out;
  }
};

inline std::vector<std::string> default_ids(std::size_t m) {
  std::vector<std::string> ids(m);
  for (std::size_t i = 0; i < m; ++i) ids[i] = std::to_string(i);
  return ids;
}

/// Shuffles the columns of X with the seed, then hands out contiguous
/// blocks of the given widths, guest first.
inline VerticalDataset vertical_split(const Matrix& x, const Vector& y,
                                      std::span<const std::size_t> counts, std::uint64_t seed) {
  const std::size_t total = std::accumulate(counts.begin(), counts.end(), std::size_t{0});
  if (total != x.cols()) {
    throw ConfigError("feature counts sum to " + std::to_string(total) + " but data has " +
                      std::to_string(x.cols()) + " columns");
  }
  if (counts.empty()) throw ConfigError("at least one party is required");
  for (auto c : counts) {
    if (c == 0) throw ConfigError("every party needs at least one feature");
  }
  vflsim::detail::require_shape(y.size() == x.rows(), "vertical_split: labels do not match rows");

  VerticalDataset ds;
  ds.y = y;
  ds.ids = default_ids(x.rows());
  ds.column_order.resize(x.cols());
  std::iota(ds.column_order.begin(), ds.column_order.end(), std::size_t{0});
  std::mt19937_64 gen(seed);
  std::shuffle(ds.column_order.begin(), ds.column_order.end(), gen);

  std::size_t offset = 0;
  for (auto c : counts) {
    const std::vector<std::size_t> cols(ds.column_order.begin() + static_cast<long>(offset),
                                        ds.column_order.begin() + static_cast<long>(offset + c));
    ds.parts.push_back(x.select_cols(cols));
    offset += c;
  }
  return ds;
}

/// Inverse of vertical_split: columns back in their original order.
inline Matrix reassemble(const VerticalDataset& ds) {
  const Matrix joined = hconcat(std::span<const Matrix>(ds.parts));
  Matrix out(joined.rows(), joined.cols());
  for (std::size_t j = 0; j < joined.cols(); ++j) {
    for (std::size_t i = 0; i < joined.rows(); ++i) out(i, ds.column_order[j]) = joined(i, j);
  }
  return out;
}

/// Builds a VerticalDataset from tables that already passed check_alignment.
inline VerticalDataset from_tables(std::span<const PartyTable> parties) {
  check_alignment(parties);
  VerticalDataset ds;
  ds.ids = parties[0].ids;
  ds.y = *parties[0].labels;
  for (const auto& p : parties) ds.parts.push_back(p.features);
  ds.column_order.resize(ds.total_features());
  std::iota(ds.column_order.begin(), ds.column_order.end(), std::size_t{0});
  return ds;
}

/// Per-column mean 0, variance 1 (population). Constant columns become 0.
inline void standardize(Matrix& x) {
  const double m = static_cast<double>(x.rows());
  if (x.rows() == 0) return;
  for (std::size_t j = 0; j < x.cols(); ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < x.rows(); ++i) mean += x(i, j);
    mean /= m;
    double var = 0.0;
    for (std::size_t i = 0; i < x.rows(); ++i) var += (x(i, j) - mean) * (x(i, j) - mean);
    const double sd = std::sqrt(var / m);
    for (std::size_t i = 0; i < x.rows(); ++i) x(i, j) = sd > 0 ? (x(i, j) - mean) / sd : 0.0;
  }
}

struct SynthConfig {
  std::size_t rows = 1000;
  std::size_t features = 20;
  std::size_t rank = 5;
  double noise = 0.1;
  /// Minimum |score| in units of the score's standard deviation.
  double margin = 0.0;
  std::uint64_t seed = 0;
};

struct Synthetic {
  Matrix x;
  Vector y;  ///< {0,1}
  Vector truth;  ///< ground-truth direction, in the row space of the factor
};

/// Low-rank factor product plus Gaussian noise, labelled by a random
/// linear rule. Rows whose score falls inside the margin are pushed out
/// along the rule's direction, which stays inside the factor's row space.
inline Synthetic synth(const SynthConfig& cfg) {
  if (cfg.rows == 0 || cfg.features == 0) throw ConfigError("synth: empty shape");
  if (cfg.rank < 1 || cfg.rank > cfg.features) {
    throw ConfigError("synth: rank must lie in [1, features]");
  }
  if (cfg.noise < 0 || cfg.margin < 0) throw ConfigError("synth: noise and margin must be >= 0");

  std::mt19937_64 gen(cfg.seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  Matrix f(cfg.rows, cfg.rank);
  for (std::size_t i = 0; i < cfg.rows; ++i)
    for (std::size_t r = 0; r < cfg.rank; ++r) f(i, r) = nd(gen);
  Matrix g(cfg.rank, cfg.features);
  const double scale = 1.0 / std::sqrt(static_cast<double>(cfg.rank));
  for (std::size_t r = 0; r < cfg.rank; ++r)
    for (std::size_t j = 0; j < cfg.features; ++j) g(r, j) = nd(gen) * scale;
  Vector a(cfg.rank);
  for (auto& v : a) v = nd(gen);

  Synthetic out;
  out.x = matmul(f, g);
  out.truth = matvec_transposed(g, a);
  const double wn2 = squared_norm(out.truth);
  if (wn2 == 0.0) throw ConfigError("synth: degenerate ground truth");

  Vector score = matvec(out.x, out.truth);
  double sd = 0.0;
  for (double s : score) sd += s * s;
  sd = std::sqrt(sd / static_cast<double>(cfg.rows));
  if (sd == 0.0) sd = 1.0;
  for (auto& v : out.truth) v /= sd;
  const double unit_n2 = squared_norm(out.truth);

  out.y.resize(cfg.rows);
  for (std::size_t i = 0; i < cfg.rows; ++i) {
    const double s = score[i] / sd;
    const double sign = s >= 0 ? 1.0 : -1.0;
    if (std::abs(s) < cfg.margin) {
      const double shift = (sign * cfg.margin - s) / unit_n2;
      for (std::size_t j = 0; j < cfg.features; ++j) out.x(i, j) += shift * out.truth[j];
    }
    out.y[i] = sign > 0 ? 1.0 : 0.0;
  }
  if (cfg.noise > 0) {
    for (std::size_t i = 0; i < cfg.rows; ++i)
      for (std::size_t j = 0; j < cfg.features; ++j) out.x(i, j) += cfg.noise * nd(gen);
  }
  return out;
}

}  // namespace vflsim::data
