// wellcast/data.hpp — well production series: ingestion, cleaning, scaling,
// sliding-window sample construction, chronological splits, multi-well merge.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "wellcast/errors.hpp"
#include "wellcast/tensor.hpp"

namespace wellcast {

// ---------------------------------------------------------------------------
// Dates (ISO-8601 calendar days, stored as days since 1970-01-01)
// ---------------------------------------------------------------------------

namespace dates {

// Howard Hinnant's civil-days algorithm.
inline std::int64_t from_civil(int y, int m, int d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153u * (m + (m > 2 ? -3 : 9)) + 2u) / 5u + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

inline void to_civil(std::int64_t z, int& y, int& m, int& d) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const std::int64_t yy = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
  m = static_cast<int>(mp + (mp < 10 ? 3 : -9));
  y = static_cast<int>(yy + (m <= 2));
}

inline std::optional<std::int64_t> parse(const std::string& s) {
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
  for (int i : {0, 1, 2, 3, 5, 6, 8, 9})
    if (s[i] < '0' || s[i] > '9') return std::nullopt;
  const int y = std::stoi(s.substr(0, 4));
  const int m = std::stoi(s.substr(5, 2));
  const int d = std::stoi(s.substr(8, 2));
  if (m < 1 || m > 12 || d < 1 || d > 31) return std::nullopt;
  return from_civil(y, m, d);
}

inline std::string format(std::int64_t day) {
  int y, m, d;
  to_civil(day, y, m, d);
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", y, m, d);
  return buf;
}

}  // namespace dates

// ---------------------------------------------------------------------------
// Series and feature sets
// ---------------------------------------------------------------------------

inline const std::vector<std::string>& canonical_columns() {
  static const std::vector<std::string> cols = {"oil_rate", "gas_rate",  "water_rate", "bhp",
                                                "bht",      "choke_pct", "liquid_rate"};
  return cols;
}

struct Column {
  std::string name;
  std::vector<double> values;
  std::vector<std::uint8_t> observed;
};

struct WellSeries {
  std::string well_id;
  std::vector<std::int64_t> dates;  // strictly increasing day stamps
  std::vector<Column> columns;      // all of equal length

  std::size_t size() const { return dates.size(); }

  const Column* find(const std::string& name) const {
    for (const auto& c : columns)
      if (c.name == name) return &c;
    return nullptr;
  }
  Column* find(const std::string& name) {
    for (auto& c : columns)
      if (c.name == name) return &c;
    return nullptr;
  }

  const Column& column(const std::string& name) const {
    const Column* c = find(name);
    if (!c) throw SchemaError("series '" + well_id + "' has no column '" + name + "'");
    return *c;
  }
};

enum class Target { bhp, liquid_rate };
enum class FeatureMode { full, reduced };

inline std::string to_string(Target t) { return t == Target::bhp ? "bhp" : "liquid_rate"; }
inline std::string to_string(FeatureMode m) { return m == FeatureMode::full ? "full" : "reduced"; }

inline Target target_from_string(const std::string& s) {
  if (s == "bhp") return Target::bhp;
  if (s == "liquid_rate") return Target::liquid_rate;
  throw ConfigError("unknown target '" + s + "'");
}

inline FeatureMode feature_mode_from_string(const std::string& s) {
  if (s == "full") return FeatureMode::full;
  if (s == "reduced") return FeatureMode::reduced;
  throw ConfigError("unknown feature mode '" + s + "'");
}

struct FeatureSet {
  FeatureMode mode = FeatureMode::full;
  Target target = Target::bhp;
  std::vector<std::string> features;  // resolved input columns, target excluded

  std::string target_name() const { return to_string(target); }

  bool operator==(const FeatureSet& o) const {
    return mode == o.mode && target == o.target && features == o.features;
  }
};

inline FeatureSet make_feature_set(FeatureMode mode, Target target) {
  FeatureSet fs;
  fs.mode = mode;
  fs.target = target;
  if (target == Target::bhp) {
    fs.features = mode == FeatureMode::full
                      ? std::vector<std::string>{"oil_rate", "gas_rate", "water_rate", "bht",
                                                 "choke_pct"}
                      : std::vector<std::string>{"choke_pct", "bht"};
  } else {
    if (mode == FeatureMode::reduced) {
      throw ConfigError("reduced feature mode is only defined for the bhp target");
    }
    fs.features = {"bhp", "bht", "choke_pct"};
  }
  return fs;
}

// ---------------------------------------------------------------------------
// CSV ingestion
// ---------------------------------------------------------------------------

using ColumnMapping = std::map<std::string, std::string>;  // source header -> canonical

inline ColumnMapping load_mapping(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open mapping file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("mapping file '" + path + "': " + e.what());
  }
  ColumnMapping m;
  for (auto it = j.begin(); it != j.end(); ++it) m[it.key()] = it.value().get<std::string>();
  return m;
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cell);
      cell.clear();
    } else if (ch != '\r') {
      cell += ch;
    }
  }
  out.push_back(cell);
  for (auto& c : out) {
    const auto b = c.find_first_not_of(" \t");
    const auto e = c.find_last_not_of(" \t");
    c = b == std::string::npos ? std::string() : c.substr(b, e - b + 1);
  }
  return out;
}

inline std::optional<double> parse_cell(const std::string& cell) {
  if (cell.empty()) return std::nullopt;
  char* end = nullptr;
  const double v = std::strtod(cell.c_str(), &end);
  if (end != cell.c_str() + cell.size()) return std::nullopt;
  if (!std::isfinite(v)) return std::nullopt;
  return v;
}

}  // namespace detail

// Reads a daily production CSV. Headers are remapped through `mapping`
// (source name -> canonical name); canonical headers pass through untouched
// and non-canonical unmapped columns are ignored. Blank or unparseable cells
// are marked missing. Rows come back sorted by date.
inline WellSeries load_series(const std::string& path, const ColumnMapping& mapping = {}) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open CSV file '" + path + "'");

  std::string line;
  if (!std::getline(in, line)) throw DataError("CSV file '" + path + "' is empty");
  const auto headers = detail::split_csv_line(line);

  // Resolve each header to a canonical name, if any.
  std::vector<std::string> canon(headers.size());
  int date_col = -1;
  for (std::size_t i = 0; i < headers.size(); ++i) {
    std::string name = headers[i];
    if (auto it = mapping.find(name); it != mapping.end()) name = it->second;
    if (name == "date") {
      date_col = static_cast<int>(i);
      continue;
    }
    const auto& canon_cols = canonical_columns();
    if (std::find(canon_cols.begin(), canon_cols.end(), name) != canon_cols.end()) {
      canon[i] = name;
    }
  }
  if (date_col < 0) throw SchemaError("CSV file '" + path + "' has no 'date' column");
  for (const auto& [src, dst] : mapping) {
    if (dst == "date") continue;
    bool found = false;
    for (const auto& c : canon) found = found || c == dst;
    if (!found) throw SchemaError("CSV file '" + path + "' is missing column '" + dst + "'");
  }

  struct Row {
    std::int64_t date;
    std::vector<std::optional<double>> cells;
  };
  std::vector<Row> rows;
  std::vector<int> used_cols;
  std::vector<std::string> used_names;
  for (std::size_t i = 0; i < canon.size(); ++i) {
    if (!canon[i].empty()) {
      used_cols.push_back(static_cast<int>(i));
      used_names.push_back(canon[i]);
    }
  }

  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != headers.size()) {
      throw DataError("CSV file '" + path + "' line " + std::to_string(line_no) +
                      ": expected " + std::to_string(headers.size()) + " cells, got " +
                      std::to_string(cells.size()));
    }
    const auto day = dates::parse(cells[date_col]);
    if (!day) {
      throw DataError("CSV file '" + path + "' line " + std::to_string(line_no) +
                      ": bad date '" + cells[date_col] + "'");
    }
    Row row;
    row.date = *day;
    row.cells.reserve(used_cols.size());
    for (int ci : used_cols) row.cells.push_back(detail::parse_cell(cells[ci]));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DataError("CSV file '" + path + "' has no data rows");

  std::stable_sort(rows.begin(), rows.end(),
                   [](const Row& a, const Row& b) { return a.date < b.date; });
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].date == rows[i - 1].date) {
      throw DataError("CSV file '" + path + "' has duplicate date " +
                      dates::format(rows[i].date));
    }
  }

  WellSeries series;
  series.dates.reserve(rows.size());
  for (const auto& r : rows) series.dates.push_back(r.date);
  for (std::size_t c = 0; c < used_names.size(); ++c) {
    Column col;
    col.name = used_names[c];
    col.values.reserve(rows.size());
    col.observed.reserve(rows.size());
    for (const auto& r : rows) {
      col.values.push_back(r.cells[c].value_or(std::numeric_limits<double>::quiet_NaN()));
      col.observed.push_back(r.cells[c].has_value() ? 1 : 0);
    }
    series.columns.push_back(std::move(col));
  }
  return series;
}

// ---------------------------------------------------------------------------
// Gap filling
// ---------------------------------------------------------------------------

// Interior gaps: linear interpolation between nearest observed neighbors.
// Leading/trailing gaps: hold the nearest observed value.
inline WellSeries interpolate_missing(const WellSeries& input) {
  WellSeries out = input;
  for (auto& col : out.columns) {
    std::vector<std::size_t> obs;
    for (std::size_t i = 0; i < col.values.size(); ++i)
      if (col.observed[i]) obs.push_back(i);
    if (obs.size() < 2) {
      throw DataError("column '" + col.name + "' of well '" + input.well_id + "' has " +
                      std::to_string(obs.size()) + " observed values; need at least 2");
    }
    for (std::size_t i = 0; i < obs.front(); ++i) col.values[i] = col.values[obs.front()];
    for (std::size_t i = obs.back() + 1; i < col.values.size(); ++i)
      col.values[i] = col.values[obs.back()];
    for (std::size_t k = 0; k + 1 < obs.size(); ++k) {
      const std::size_t a = obs[k], b = obs[k + 1];
      const double va = col.values[a], vb = col.values[b];
      for (std::size_t i = a + 1; i < b; ++i) {
        const double t = static_cast<double>(i - a) / static_cast<double>(b - a);
        col.values[i] = va + t * (vb - va);
      }
    }
    std::fill(col.observed.begin(), col.observed.end(), 1);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Min-max scaling (train-split statistics)
// ---------------------------------------------------------------------------

struct ScalerParams {
  struct MinMax {
    double min = 0.0;
    double max = 0.0;
  };
  std::vector<std::pair<std::string, MinMax>> per_feature;  // fit order preserved

  const MinMax& get(const std::string& name) const {
    for (const auto& [n, mm] : per_feature)
      if (n == name) return mm;
    throw ContractError("scaler has no parameters for feature '" + name + "'");
  }

  double scale_value(const std::string& name, double x) const {
    const auto& mm = get(name);
    if (mm.max == mm.min) return 0.0;  // constant feature carries no signal
    return (x - mm.min) / (mm.max - mm.min);
  }

  double inverse_value(const std::string& name, double s) const {
    const auto& mm = get(name);
    if (mm.max == mm.min) return mm.min;
    return s * (mm.max - mm.min) + mm.min;
  }

  nlohmann::json to_json() const {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [n, mm] : per_feature) j[n] = {{"min", mm.min}, {"max", mm.max}};
    return j;
  }

  static ScalerParams from_json(const nlohmann::json& j) {
    ScalerParams p;
    for (auto it = j.begin(); it != j.end(); ++it) {
      p.per_feature.push_back({it.key(), {it.value().at("min").get<double>(),
                                          it.value().at("max").get<double>()}});
    }
    std::sort(p.per_feature.begin(), p.per_feature.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    return p;
  }
};

// Fits min/max on rows [0, train_rows) only — the chronological training
// range — over the feature columns plus the target column.
inline ScalerParams fit_scaler(const WellSeries& series, const FeatureSet& features,
                               std::size_t train_rows) {
  if (train_rows == 0 || train_rows > series.size()) {
    throw ContractError("fit_scaler: train range [0, " + std::to_string(train_rows) +
                        ") invalid for series of length " + std::to_string(series.size()));
  }
  std::vector<std::string> names = features.features;
  names.push_back(features.target_name());
  ScalerParams params;
  for (const auto& name : names) {
    const Column& col = series.column(name);
    double lo = col.values[0], hi = col.values[0];
    for (std::size_t i = 0; i < train_rows; ++i) {
      lo = std::min(lo, col.values[i]);
      hi = std::max(hi, col.values[i]);
    }
    params.per_feature.push_back({name, {lo, hi}});
  }
  return params;
}

// Applies train statistics to the whole series; out-of-train-range values
// legitimately fall outside [0, 1].
inline WellSeries apply_scaler(const WellSeries& series, const ScalerParams& params) {
  WellSeries out = series;
  for (auto& col : out.columns) {
    bool listed = false;
    for (const auto& [n, mm] : params.per_feature) listed = listed || n == col.name;
    if (!listed) continue;
    for (auto& v : col.values) v = params.scale_value(col.name, v);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Samples, windows, splits
// ---------------------------------------------------------------------------

struct Sample {
  Tensor window;                    // [N x M] scaled features
  double target = 0.0;              // scaled target at the window's final day
  int pad_len = 0;                  // leading all-zero rows
  std::vector<double> well_onehot;  // empty in single-well mode
  std::int64_t date = 0;            // target day stamp
  std::string well_id;
};

// One sample per day t in [0, T): rows t-N+1..t with zero rows prepended
// while the history is incomplete.
inline std::vector<Sample> make_windows(const WellSeries& scaled, int window_len,
                                        const FeatureSet& features) {
  if (window_len <= 0) throw ContractError("make_windows: window length must be >= 1");
  const std::size_t total = scaled.size();
  if (total == 0) throw DataError("make_windows: empty series");

  std::vector<const Column*> cols;
  cols.reserve(features.features.size());
  for (const auto& name : features.features) cols.push_back(&scaled.column(name));
  const Column& target_col = scaled.column(features.target_name());
  const int m = static_cast<int>(cols.size());

  std::vector<Sample> samples;
  samples.reserve(total);
  for (std::size_t t = 0; t < total; ++t) {
    Sample s;
    s.pad_len = static_cast<int>(std::max<std::int64_t>(
        0, static_cast<std::int64_t>(window_len) - 1 - static_cast<std::int64_t>(t)));
    s.window = Tensor::zeros(window_len, m);
    for (int r = s.pad_len; r < window_len; ++r) {
      const auto day = static_cast<std::size_t>(static_cast<std::int64_t>(t) + 1 - window_len + r);
      for (int j = 0; j < m; ++j) s.window(r, j) = cols[j]->values[day];
    }
    s.target = target_col.values[t];
    s.date = scaled.dates[t];
    s.well_id = scaled.well_id;
    samples.push_back(std::move(s));
  }
  return samples;
}

struct SplitRatios {
  double train = 0.70;
  double validation = 0.15;
  double test = 0.15;
};

struct DatasetSplits {
  std::vector<Sample> train;
  std::vector<Sample> validation;
  std::vector<Sample> test;
};

// Contiguous chronological cut at floor(r1*T) and floor((r1+r2)*T).
inline DatasetSplits split_chronological(const std::vector<Sample>& samples,
                                         const SplitRatios& ratios = {}) {
  if (ratios.train <= 0.0 || ratios.validation <= 0.0 || ratios.test <= 0.0 ||
      std::abs(ratios.train + ratios.validation + ratios.test - 1.0) > 1e-9) {
    throw ContractError("split_chronological: ratios must be positive and sum to 1");
  }
  const std::size_t total = samples.size();
  const std::size_t cut1 = static_cast<std::size_t>(std::floor(ratios.train * total));
  const std::size_t cut2 =
      static_cast<std::size_t>(std::floor((ratios.train + ratios.validation) * total));
  if (cut1 == 0 || cut2 <= cut1 || cut2 >= total) {
    throw DataError("split_chronological: " + std::to_string(total) +
                    " samples leave an empty split");
  }
  DatasetSplits splits;
  splits.train.assign(samples.begin(), samples.begin() + cut1);
  splits.validation.assign(samples.begin() + cut1, samples.begin() + cut2);
  splits.test.assign(samples.begin() + cut2, samples.end());
  return splits;
}

// ---------------------------------------------------------------------------
// Global (multi-well) merge with one-hot well identifiers
// ---------------------------------------------------------------------------

// Widens one sample's window by `total_wells` one-hot columns, set for well
// `index` on every non-padded row. Padded rows stay all-zero.
inline Sample with_onehot(const Sample& src, int total_wells, int index) {
  Sample s = src;
  const int m = src.window.cols();
  s.well_onehot.assign(total_wells, 0.0);
  s.well_onehot[index] = 1.0;
  Tensor wide = Tensor::zeros(src.window.rows(), m + total_wells);
  for (int r = 0; r < src.window.rows(); ++r) {
    for (int j = 0; j < m; ++j) wide(r, j) = src.window(r, j);
    if (r >= src.pad_len) wide(r, m + index) = 1.0;
  }
  s.window = wide;
  return s;
}

// Appends one one-hot column per well to every window (zero inside padded
// rows, so padding stays all-zero) and merges the per-well lists in id order.
inline std::vector<Sample> build_global(const std::vector<std::vector<Sample>>& wells,
                                        const std::vector<std::string>& ids) {
  if (wells.size() < 2) throw ContractError("global dataset requires at least 2 wells");
  if (wells.size() != ids.size()) {
    throw ContractError("build_global: " + std::to_string(wells.size()) + " sample lists vs " +
                        std::to_string(ids.size()) + " ids");
  }
  const int w = static_cast<int>(wells.size());
  int m = -1, n = -1;
  for (const auto& list : wells) {
    for (const auto& s : list) {
      if (m < 0) {
        m = s.window.cols();
        n = s.window.rows();
      } else if (s.window.cols() != m || s.window.rows() != n) {
        throw ContractError("build_global: mismatched feature sets across wells");
      }
    }
  }
  (void)n;

  std::vector<Sample> merged;
  for (int wi = 0; wi < w; ++wi) {
    for (const auto& src : wells[wi]) {
      Sample s = with_onehot(src, w, wi);
      s.well_id = ids[wi];
      merged.push_back(std::move(s));
    }
  }
  return merged;
}

}  // namespace wellcast
