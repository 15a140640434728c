#include "adar/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>

#include "adar/csv.hpp"
#include "adar/error.hpp"

namespace adar {

MissingPolicy missing_policy_from_string(std::string_view name) {
  if (name == "drop") return MissingPolicy::drop;
  if (name == "impute-mean" || name == "impute_mean") return MissingPolicy::impute_mean;
  throw ConfigError("unknown missing-value policy: " + std::string(name));
}

std::string_view to_string(MissingPolicy policy) {
  return policy == MissingPolicy::drop ? "drop" : "impute-mean";
}

void to_json(nlohmann::json& j, const CsvSchema& schema) {
  j = {{"target", schema.target_column}, {"features", schema.feature_columns}, {"missing", to_string(schema.missing)}};
}

void from_json(const nlohmann::json& j, CsvSchema& schema) {
  try {
    schema.target_column = j.at("target").get<std::string>();
    schema.feature_columns = j.value("features", std::vector<std::string>{});
    schema.missing = missing_policy_from_string(j.value("missing", std::string("drop")));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("schema: ") + e.what());
  }
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

std::optional<double> parse_cell(std::string_view cell) {
  cell = trim(cell);
  if (cell.empty() || cell == "?" || cell == "NA" || cell == "NaN" || cell == "nan") return std::nullopt;
  if (cell.front() == '+') cell.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

}  // namespace

RawTable parse_csv_table(std::string_view text, const CsvSchema& schema) {
  const auto rows = parse_csv(text);
  if (rows.empty()) throw SchemaError("CSV has no header row");
  const auto& header = rows.front();
  auto column = [&](const std::string& name) {
    auto it = std::ranges::find_if(header, [&](const std::string& h) { return trim(h) == name; });
    if (it == header.end()) throw SchemaError("CSV is missing column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };

  auto has_numeric = [&](std::size_t c) {
    for (std::size_t r = 1; r < rows.size(); ++r) {
      if (c < rows[r].size() && parse_cell(rows[r][c])) return true;
    }
    return false;
  };

  const auto target = column(schema.target_column);
  RawTable out;
  std::vector<std::size_t> features;
  if (schema.feature_columns.empty()) {
    // Implicit selection skips text columns such as names or labels.
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (c == target || !has_numeric(c)) continue;
      features.push_back(c);
      out.feature_names.emplace_back(trim(header[c]));
    }
  } else {
    for (const auto& name : schema.feature_columns) {
      const auto c = column(name);
      if (!has_numeric(c)) throw SchemaError("column '" + name + "' has no numeric values");
      features.push_back(c);
      out.feature_names.push_back(name);
    }
  }
  if (features.empty()) throw SchemaError("schema selects no feature columns");

  const auto D = features.size();
  std::vector<std::vector<std::optional<double>>> cells;
  std::vector<double> y;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    auto get = [&](std::size_t c) { return c < row.size() ? parse_cell(row[c]) : std::nullopt; };
    const auto t = get(target);
    std::vector<std::optional<double>> x(D);
    bool complete = true;
    for (std::size_t i = 0; i < D; ++i) {
      x[i] = get(features[i]);
      complete = complete && x[i].has_value();
    }
    if (!t || (!complete && schema.missing == MissingPolicy::drop)) {
      ++out.dropped_rows;
      continue;
    }
    y.push_back(*t);
    cells.push_back(std::move(x));
  }

  std::vector<double> means(D, 0.0);
  if (schema.missing == MissingPolicy::impute_mean) {
    for (std::size_t i = 0; i < D; ++i) {
      double sum = 0.0;
      std::size_t count = 0;
      for (const auto& row : cells) {
        if (row[i]) {
          sum += *row[i];
          ++count;
        }
      }
      if (count == 0) throw SchemaError("column '" + out.feature_names[i] + "' has no numeric values in kept rows");
      means[i] = sum / static_cast<double>(count);
    }
  }

  if (cells.empty()) throw SchemaError("no rows left after dropping rows with missing values");
  out.X = Matrix(cells.size(), D);
  for (std::size_t r = 0; r < cells.size(); ++r) {
    for (std::size_t i = 0; i < D; ++i) {
      if (cells[r][i]) {
        out.X(r, i) = *cells[r][i];
      } else {
        out.X(r, i) = means[i];
        ++out.imputed_cells;
      }
    }
  }
  out.y = std::move(y);
  return out;
}

RawTable load_csv(const std::filesystem::path& path, const CsvSchema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SchemaError("cannot open CSV file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_csv_table(buf.str(), schema);
}

std::pair<double, double> mean_std(std::span<const double> values) {
  if (values.empty()) return {0.0, 0.0};
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  return {mean, std::sqrt(var / n)};
}

SplitIndices split(std::size_t n, std::uint64_t seed) {
  if (n < 10) throw ConfigError("split: need at least 10 rows, got " + std::to_string(n));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::ranges::shuffle(order, rng);

  const auto n_test = static_cast<std::size_t>(std::llround(0.2 * static_cast<double>(n)));
  const auto rest = n - n_test;
  const auto n_val = static_cast<std::size_t>(std::llround(0.2 * static_cast<double>(rest)));
  SplitIndices s;
  s.test.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
  s.val.assign(order.begin() + static_cast<std::ptrdiff_t>(n_test),
               order.begin() + static_cast<std::ptrdiff_t>(n_test + n_val));
  s.train.assign(order.begin() + static_cast<std::ptrdiff_t>(n_test + n_val), order.end());
  return s;
}

void Dataset::resplit(std::uint64_t new_seed) {
  seed = new_seed;
  splits = split(size(), new_seed);
}

std::vector<double> Dataset::rows_y(const std::vector<std::size_t>& rows) const {
  std::vector<double> out(rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) out[k] = y[rows[k]];
  return out;
}

TrainValSplit Dataset::train_val() const {
  return {rows_X(splits.train), rows_y(splits.train), rows_X(splits.val), rows_y(splits.val)};
}

Dataset standardize(const RawTable& table, std::string name, std::uint64_t seed) {
  const auto N = table.X.rows();
  const auto D = table.X.cols();
  Dataset ds;
  ds.name = std::move(name);
  ds.feature_names = table.feature_names;
  ds.X = Matrix(N, D);
  ds.stats.x_mean.resize(D);
  ds.stats.x_std.resize(D);
  std::vector<double> col(N);
  for (std::size_t i = 0; i < D; ++i) {
    for (std::size_t r = 0; r < N; ++r) col[r] = table.X(r, i);
    const auto [mean, sd] = mean_std(col);
    if (!(sd > 0.0)) {
      const auto label = i < table.feature_names.size() ? table.feature_names[i] : std::to_string(i);
      throw ConfigError("column '" + label + "' is constant; remove it from the schema");
    }
    ds.stats.x_mean[i] = mean;
    ds.stats.x_std[i] = sd;
    for (std::size_t r = 0; r < N; ++r) ds.X(r, i) = (table.X(r, i) - mean) / sd;
  }
  const auto [ymean, ysd] = mean_std(table.y);
  if (!(ysd > 0.0)) throw ConfigError("target column is constant");
  ds.stats.y_mean = ymean;
  ds.stats.y_std = ysd;
  ds.y.resize(N);
  for (std::size_t r = 0; r < N; ++r) ds.y[r] = (table.y[r] - ymean) / ysd;
  ds.resplit(seed);
  return ds;
}

SynthKind synth_kind_from_string(std::string_view name) {
  if (name == "piecewise_linear") return SynthKind::piecewise_linear;
  if (name == "gaussian_bumps") return SynthKind::gaussian_bumps;
  throw ConfigError("unknown synthetic dataset kind: " + std::string(name));
}

SyntheticTable synthesize_table(SynthKind kind, std::size_t n, std::size_t d, double noise_std, std::uint64_t seed) {
  if (n == 0 || d == 0) throw ConfigError("synthesize: need at least one row and one attribute");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-3.0, 3.0);
  std::normal_distribution<double> noise(0.0, 1.0);

  SyntheticTable out;
  out.rules = 3;
  auto& t = out.table;
  t.X = Matrix(n, d);
  t.y.resize(n);
  out.region.resize(n);
  for (std::size_t i = 0; i < d; ++i) t.feature_names.push_back("x" + std::to_string(i));

  // Fixed generating models so every seed sees the same ground truth.
  constexpr double kSlope[3] = {-2.0, 1.5, -1.0};
  constexpr double kIntercept[3] = {-3.0, 1.0, 4.0};
  constexpr double kBumpHeight[3] = {3.0, -2.0, 2.5};
  constexpr double kBumpShift[3] = {-1.8, 0.0, 1.8};
  constexpr double kBumpWidth = 0.8;

  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t i = 0; i < d; ++i) t.X(r, i) = unif(rng);
    const auto x = t.X.row(r);
    double value = 0.0;
    if (kind == SynthKind::piecewise_linear) {
      const int region = x[0] < -1.0 ? 0 : (x[0] < 1.0 ? 1 : 2);
      value = kIntercept[region] + kSlope[region] * x[0];
      for (std::size_t i = 1; i < d; ++i) value += 0.5 * std::cos(static_cast<double>(region + i)) * x[i];
      out.region[r] = region;
    } else {
      int nearest = 0;
      double nearest_d2 = std::numeric_limits<double>::infinity();
      for (int k = 0; k < 3; ++k) {
        double d2 = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
          const double c = i == 0 ? kBumpShift[k] : 0.5 * kBumpShift[k] * std::cos(static_cast<double>(i));
          d2 += (x[i] - c) * (x[i] - c);
        }
        value += kBumpHeight[k] * std::exp(-0.5 * d2 / (kBumpWidth * kBumpWidth));
        if (d2 < nearest_d2) {
          nearest_d2 = d2;
          nearest = k;
        }
      }
      out.region[r] = nearest;
    }
    t.y[r] = value + noise_std * noise(rng);
  }
  return out;
}

Dataset synthesize(SynthKind kind, std::size_t n, std::size_t d, double noise_std, std::uint64_t seed) {
  auto synth = synthesize_table(kind, n, d, noise_std, seed);
  auto ds = standardize(synth.table, kind == SynthKind::piecewise_linear ? "piecewise_linear" : "gaussian_bumps", seed);
  ds.ground_truth_rules = synth.rules;
  return ds;
}

nlohmann::json to_json(const Dataset& ds) {
  auto rows = nlohmann::json::array();
  for (std::size_t r = 0; r < ds.X.rows(); ++r) {
    const auto row = ds.X.row(r);
    rows.push_back(std::vector<double>(row.begin(), row.end()));
  }
  return {{"name", ds.name},
          {"feature_names", ds.feature_names},
          {"X", rows},
          {"y", ds.y},
          {"norm_stats",
           {{"x_mean", ds.stats.x_mean}, {"x_std", ds.stats.x_std}, {"y_mean", ds.stats.y_mean}, {"y_std", ds.stats.y_std}}},
          {"splits", {{"train", ds.splits.train}, {"val", ds.splits.val}, {"test", ds.splits.test}}},
          {"seed", ds.seed},
          {"ground_truth_rules", ds.ground_truth_rules}};
}

}  // namespace adar
