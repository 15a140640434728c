#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "adar/config.hpp"
#include "adar/data.hpp"
#include "adar/metrics.hpp"
#include "adar/training.hpp"

namespace adar {

/// Where the rows come from: a CSV file plus schema, or a built-in generator.
struct DatasetSource {
  std::filesystem::path path;  // empty when synthetic is set
  CsvSchema schema;
  std::optional<SynthKind> synthetic;
  std::size_t synthetic_rows = 2000;
  std::size_t synthetic_attrs = 2;
  double synthetic_noise = 0.05;
  std::uint64_t synthetic_seed = 7;
};

/// Loads and standardizes the source. The split is redone per run.
Dataset load_dataset(const DatasetSource& source);

struct GridAxes {
  std::vector<double> growth_threshold{5e-5, 1e-4};
  std::vector<double> prune_rule_threshold{0.05, 0.1};
  std::vector<std::size_t> prune_rule_freq{50, 100};
  std::vector<double> prune_attr_threshold{0.05, 0.1};
  std::vector<std::size_t> prune_attr_freq{25, 50};
};

struct ExperimentSpec {
  DatasetSource dataset;
  TrainConfig base;
  std::vector<std::size_t> max_rules{5};
  std::size_t repeats = 1;
  std::uint64_t base_seed = 0;
  std::filesystem::path out_dir = "results";
  GridAxes grid;
  std::size_t jobs = 1;
  /// Write per-run model/event-log directories under out_dir/runs.
  bool write_run_artifacts = true;
};

ExperimentSpec experiment_spec_from_json(const nlohmann::json& j);

struct Ablation {
  std::string_view name;
  bool ap_enabled;
  bool rgrp_enabled;
};

inline constexpr std::array<Ablation, 4> kAblations = {{
    {"Baseline", false, false},
    {"Baseline+RG&RP", false, true},
    {"Baseline+AP", true, false},
    {"ADAR", true, true},
}};

/// One concrete training job.
struct RunPoint {
  std::string config_id;
  TrainConfig cfg;
  std::size_t repeat = 0;
  std::uint64_t split_seed = 0;
};

/// Training seed of a run: derive_seed({base, fnv1a64(config_id), repeat}).
std::uint64_t run_seed(std::uint64_t base_seed, std::string_view config_id, std::size_t repeat);
/// Split seed of a repeat, shared by every configuration: derive_seed({base, repeat}).
std::uint64_t split_seed(std::uint64_t base_seed, std::size_t repeat);
std::uint64_t fnv1a64(std::string_view text);

/// Python-style shortest float text: 5e-05, 0.0001, 0.1, 50.
std::string format_param(double value);
/// Compact parameter-set label such as G5e-05_PR0.1_PF50_PA0.05_PAF25.
std::string param_set_label(const TrainConfig& cfg);

std::vector<RunPoint> expand_train(const ExperimentSpec& spec);
std::vector<RunPoint> expand_ablation(const ExperimentSpec& spec);
std::vector<RunPoint> expand_grid(const ExperimentSpec& spec);

struct RunRecord {
  std::string dataset;
  std::string config_id;
  std::size_t repeat = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  MetricsReport metrics;
  std::size_t grow_events = 0;
  std::size_t prune_rule_events = 0;
  std::size_t prune_attr_events = 0;
  std::size_t rollback_events = 0;
  std::optional<std::filesystem::path> artifact_dir;
};

/// Fits one point and scores the best-validation model on the test split.
/// With artifact_root set, writes events.jsonl, model.json, metrics.json and
/// config.json under artifact_root/<run id>/. Errors are rethrown with the run id.
struct RunOutput {
  RunRecord record;
  FitResult fit;
};
RunOutput run_single(const Dataset& base, const RunPoint& point,
                     const std::optional<std::filesystem::path>& artifact_root = std::nullopt);

struct AggregateRow {
  std::string param_set;
  std::size_t runs = 0;
  std::size_t failed = 0;
  double mean_rmse = 0.0;
  double std_rmse = 0.0;
  double mean_rmse_standardized = 0.0;
  double mean_i_ov = 0.0;
  double std_i_ov = 0.0;
  double mean_i_fsp = 0.0;
  double std_i_fsp = 0.0;
  double mean_rules = 0.0;
  double mean_attributes = 0.0;
};

struct ExperimentReport {
  std::vector<RunRecord> runs;
  std::vector<AggregateRow> aggregates;
  std::size_t failures() const;
};

/// Mean and population std per config id, in first-appearance order. Failed
/// runs are counted but excluded from the statistics.
std::vector<AggregateRow> aggregate(const std::vector<RunRecord>& runs);

/// Runs every point on `jobs` threads; the result order follows `points`.
ExperimentReport run_points(const Dataset& data, const std::vector<RunPoint>& points, std::size_t jobs,
                            const std::optional<std::filesystem::path>& artifact_root);

ExperimentReport run_train(const ExperimentSpec& spec);
ExperimentReport run_ablation(const ExperimentSpec& spec);
ExperimentReport run_grid(const ExperimentSpec& spec);

enum class ReportFormat { csv, json, both };
ReportFormat report_format_from_string(std::string_view name);

/// Writes aggregate.{csv,json} and runs.{csv,json} (plus failures.csv when any
/// run failed) into dir. Throws Error when dir cannot be written.
void emit_report(const ExperimentReport& report, const std::filesystem::path& dir, ReportFormat format);

std::string aggregate_csv(const std::vector<AggregateRow>& rows);
nlohmann::json aggregate_json(const std::vector<AggregateRow>& rows);
std::string runs_csv(const std::vector<RunRecord>& runs);
/// Parses a runs.csv produced by runs_csv.
std::vector<RunRecord> parse_runs_csv(std::string_view text);

}  // namespace adar
