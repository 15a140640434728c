#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "adar/matrix.hpp"
#include "adar/training.hpp"

namespace adar {

enum class MissingPolicy { drop, impute_mean };

MissingPolicy missing_policy_from_string(std::string_view name);
std::string_view to_string(MissingPolicy policy);

/// Which CSV columns to read. An empty feature list means "every column except
/// the target that holds at least one number".
struct CsvSchema {
  std::string target_column;
  std::vector<std::string> feature_columns;
  MissingPolicy missing = MissingPolicy::drop;
};

void to_json(nlohmann::json& j, const CsvSchema& schema);
void from_json(const nlohmann::json& j, CsvSchema& schema);

/// Numeric table as read from disk, before standardization.
struct RawTable {
  std::vector<std::string> feature_names;
  Matrix X;
  std::vector<double> y;
  std::size_t dropped_rows = 0;
  std::size_t imputed_cells = 0;
};

/// Reads a CSV with a header row. Empty, "?", "NA" and "NaN" cells are
/// missing; so is any cell that does not parse as a number. Rows with a
/// missing target are always dropped. Throws SchemaError naming an absent column.
RawTable load_csv(const std::filesystem::path& path, const CsvSchema& schema);
RawTable parse_csv_table(std::string_view text, const CsvSchema& schema);

struct NormStats {
  std::vector<double> x_mean;
  std::vector<double> x_std;
  double y_mean = 0.0;
  double y_std = 1.0;

  double destandardize_y(double z) const { return z * y_std + y_mean; }
};

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

/// Seeded shuffle; 20% test, then 20% of the remainder as validation. N >= 10.
SplitIndices split(std::size_t n, std::uint64_t seed);

struct Dataset {
  std::string name;
  Matrix X;               // standardized
  std::vector<double> y;  // standardized
  std::vector<std::string> feature_names;
  NormStats stats;
  SplitIndices splits;
  std::uint64_t seed = 0;
  /// Rules in the generating model; 0 for real data.
  std::size_t ground_truth_rules = 0;

  std::size_t size() const { return y.size(); }
  /// Re-splits with a new seed.
  void resplit(std::uint64_t new_seed);
  TrainValSplit train_val() const;
  Matrix rows_X(const std::vector<std::size_t>& rows) const { return X.select_rows(rows); }
  std::vector<double> rows_y(const std::vector<std::size_t>& rows) const;
};

/// Z-scores every feature column and the target with population statistics
/// over all rows, then splits with `seed`. Throws ConfigError on a constant column.
Dataset standardize(const RawTable& table, std::string name, std::uint64_t seed);

/// Population mean/std of one column.
std::pair<double, double> mean_std(std::span<const double> values);

enum class SynthKind { piecewise_linear, gaussian_bumps };

SynthKind synth_kind_from_string(std::string_view name);

/// Raw (unstandardized) synthetic regression table plus the generating rule count.
///
/// piecewise_linear: x ~ U(-3, 3)^D, three regions split on x0 at -1 and 1,
/// each with its own affine target. gaussian_bumps: sum of three isotropic
/// Gaussian bumps. Gaussian noise with std noise_std is added to y.
struct SyntheticTable {
  RawTable table;
  std::vector<int> region;  // generating component of each row
  std::size_t rules = 0;
};

SyntheticTable synthesize_table(SynthKind kind, std::size_t n, std::size_t d, double noise_std, std::uint64_t seed);
Dataset synthesize(SynthKind kind, std::size_t n, std::size_t d, double noise_std, std::uint64_t seed);

nlohmann::json to_json(const Dataset& ds);

}  // namespace adar
