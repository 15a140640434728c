#include "adar/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "adar/csv.hpp"
#include "adar/error.hpp"
#include "adar/random.hpp"

namespace adar {

namespace fs = std::filesystem;

Dataset load_dataset(const DatasetSource& source) {
  if (source.synthetic) {
    return synthesize(*source.synthetic, source.synthetic_rows, source.synthetic_attrs, source.synthetic_noise,
                      source.synthetic_seed);
  }
  if (source.path.empty()) throw ConfigError("no dataset given: set a CSV path or a synthetic generator");
  const auto table = load_csv(source.path, source.schema);
  return standardize(table, source.path.stem().string(), 0);
}

namespace {

template <typename T>
void read_list(const nlohmann::json& j, const char* key, std::vector<T>& out) {
  if (!j.contains(key)) return;
  if (j[key].is_array()) {
    out = j[key].get<std::vector<T>>();
  } else {
    out = {j[key].get<T>()};
  }
}

}  // namespace

ExperimentSpec experiment_spec_from_json(const nlohmann::json& j) {
  ExperimentSpec spec;
  try {
    if (j.contains("dataset")) {
      const auto& d = j["dataset"];
      if (d.contains("synthetic")) {
        spec.dataset.synthetic = synth_kind_from_string(d["synthetic"].get<std::string>());
        spec.dataset.synthetic_rows = d.value("rows", spec.dataset.synthetic_rows);
        spec.dataset.synthetic_attrs = d.value("attrs", spec.dataset.synthetic_attrs);
        spec.dataset.synthetic_noise = d.value("noise", spec.dataset.synthetic_noise);
        spec.dataset.synthetic_seed = d.value("seed", spec.dataset.synthetic_seed);
      } else {
        spec.dataset.path = d.at("path").get<std::string>();
        from_json(d, spec.dataset.schema);
      }
    }
    if (j.contains("train")) from_json(j["train"], spec.base);
    read_list(j, "max_rules", spec.max_rules);
    spec.repeats = j.value("repeats", spec.repeats);
    spec.base_seed = j.value("seed", spec.base_seed);
    spec.jobs = j.value("jobs", spec.jobs);
    if (j.contains("out")) spec.out_dir = j["out"].get<std::string>();
    if (j.contains("grid")) {
      const auto& g = j["grid"];
      read_list(g, "g_thres", spec.grid.growth_threshold);
      read_list(g, "pr_thres", spec.grid.prune_rule_threshold);
      read_list(g, "pr_freq", spec.grid.prune_rule_freq);
      read_list(g, "pa_thres", spec.grid.prune_attr_threshold);
      read_list(g, "pa_freq", spec.grid.prune_attr_freq);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("experiment config: ") + e.what());
  }
  return spec;
}

std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t run_seed(std::uint64_t base_seed, std::string_view config_id, std::size_t repeat) {
  return derive_seed({base_seed, fnv1a64(config_id), static_cast<std::uint64_t>(repeat)});
}

std::uint64_t split_seed(std::uint64_t base_seed, std::size_t repeat) {
  return derive_seed({base_seed, static_cast<std::uint64_t>(repeat)});
}

std::string format_param(double value) {
  char buf[64];
  const double mag = std::abs(value);
  const auto fmt = (mag == 0.0 || (mag >= 1e-4 && mag < 1e16)) ? std::chars_format::fixed
                                                               : std::chars_format::scientific;
  const auto res = std::to_chars(buf, buf + sizeof(buf), value, fmt);
  return {buf, res.ptr};
}

std::string param_set_label(const TrainConfig& cfg) {
  return "G" + format_param(cfg.growth_threshold) + "_PR" + format_param(cfg.theta_rule) + "_PF" +
         std::to_string(cfg.prune_rule_freq) + "_PA" + format_param(cfg.theta_attr) + "_PAF" +
         std::to_string(cfg.prune_attr_freq);
}

namespace {

void add_repeats(const ExperimentSpec& spec, const std::string& id, TrainConfig cfg, std::vector<RunPoint>& out) {
  if (spec.repeats == 0) throw ConfigError("repeats must be at least 1");
  for (std::size_t r = 0; r < spec.repeats; ++r) {
    cfg.seed = run_seed(spec.base_seed, id, r);
    cfg.validate();
    out.push_back({id, cfg, r, split_seed(spec.base_seed, r)});
  }
}

std::string rules_suffix(std::size_t max_rules) { return "_R" + std::to_string(max_rules); }

}  // namespace

std::vector<RunPoint> expand_train(const ExperimentSpec& spec) {
  std::vector<RunPoint> out;
  for (auto m : spec.max_rules) {
    auto cfg = spec.base;
    cfg.max_rules = m;
    add_repeats(spec, "train" + rules_suffix(m), cfg, out);
  }
  return out;
}

std::vector<RunPoint> expand_ablation(const ExperimentSpec& spec) {
  std::vector<RunPoint> out;
  for (auto m : spec.max_rules) {
    for (const auto& ab : kAblations) {
      auto cfg = spec.base;
      cfg.max_rules = m;
      cfg.ap_enabled = ab.ap_enabled;
      cfg.rgrp_enabled = ab.rgrp_enabled;
      add_repeats(spec, std::string(ab.name) + rules_suffix(m), cfg, out);
    }
  }
  return out;
}

std::vector<RunPoint> expand_grid(const ExperimentSpec& spec) {
  const auto& g = spec.grid;
  if (g.growth_threshold.empty() || g.prune_rule_threshold.empty() || g.prune_rule_freq.empty() ||
      g.prune_attr_threshold.empty() || g.prune_attr_freq.empty() || spec.max_rules.empty()) {
    throw ConfigError("every grid axis needs at least one value");
  }
  std::vector<RunPoint> out;
  for (auto m : spec.max_rules) {
    for (double gt : g.growth_threshold) {
      for (double pr : g.prune_rule_threshold) {
        for (auto pf : g.prune_rule_freq) {
          for (double pa : g.prune_attr_threshold) {
            for (auto paf : g.prune_attr_freq) {
              auto cfg = spec.base;
              cfg.ap_enabled = true;
              cfg.rgrp_enabled = true;
              cfg.max_rules = m;
              cfg.growth_threshold = gt;
              cfg.theta_rule = pr;
              cfg.prune_rule_freq = pf;
              cfg.theta_attr = pa;
              cfg.prune_attr_freq = paf;
              auto id = param_set_label(cfg);
              if (spec.max_rules.size() > 1) id += rules_suffix(m);
              add_repeats(spec, id, cfg, out);
            }
          }
        }
      }
    }
  }
  return out;
}

namespace {

std::string sanitize(std::string_view id) {
  std::string out(id);
  for (auto& ch : out) {
    const bool ok = (ch >= 'a' && ch <= 'z') || (ch >= 'A' && ch <= 'Z') || (ch >= '0' && ch <= '9') ||
                    ch == '.' || ch == '_' || ch == '-' || ch == '+';
    if (!ok) ch = '-';
  }
  return out;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << content;
  if (!out) throw Error("failed writing " + path.string());
}

}  // namespace

RunOutput run_single(const Dataset& base, const RunPoint& point, const std::optional<fs::path>& artifact_root) {
  const auto run_id = point.config_id + "/rep" + std::to_string(point.repeat);
  try {
    Dataset ds = base;
    ds.resplit(point.split_seed);
    RunOutput out;
    out.fit = fit(ds.train_val(), point.cfg);
    const auto& model = out.fit.model;

    const auto X_test = ds.rows_X(ds.splits.test);
    const auto y_test = ds.rows_y(ds.splits.test);
    const auto pred = predict_batch(model, X_test);
    std::vector<double> pred_orig(pred.size()), y_orig(pred.size());
    for (std::size_t n = 0; n < pred.size(); ++n) {
      pred_orig[n] = ds.stats.destandardize_y(pred[n]);
      y_orig[n] = ds.stats.destandardize_y(y_test[n]);
    }

    auto& rec = out.record;
    rec.dataset = ds.name;
    rec.config_id = point.config_id;
    rec.repeat = point.repeat;
    rec.seed = point.cfg.seed;
    rec.metrics.rmse = rmse(pred_orig, y_orig);
    rec.metrics.rmse_standardized = rmse(pred, y_test);
    rec.metrics.i_ov = overlap_index(model);
    rec.metrics.i_fsp = fsp_index(model);
    const auto counts = structural_counts(model);
    rec.metrics.final_rules = counts.rules;
    rec.metrics.final_attributes = counts.attributes;
    rec.grow_events = out.fit.log.count(EventKind::grow);
    rec.prune_rule_events = out.fit.log.count(EventKind::prune_rule);
    rec.prune_attr_events = out.fit.log.count(EventKind::prune_attr);
    rec.rollback_events = out.fit.log.count(EventKind::rollback);
    rec.ok = true;

    if (artifact_root) {
      const auto dir = *artifact_root / sanitize(point.config_id) / ("rep" + std::to_string(point.repeat));
      fs::create_directories(dir);
      std::ostringstream events;
      out.fit.log.write_jsonl(events);
      write_file(dir / "events.jsonl", events.str());
      write_file(dir / "model.json", to_json(model).dump(2) + "\n");
      write_file(dir / "initial_model.json", to_json(out.fit.log.initial).dump(2) + "\n");
      write_file(dir / "final_state.json", to_json(out.fit.log.final_state).dump(2) + "\n");
      nlohmann::json cfg_json = point.cfg;
      cfg_json["split_seed"] = point.split_seed;
      write_file(dir / "config.json", cfg_json.dump(2) + "\n");
      write_file(dir / "metrics.json", to_json(rec.metrics).dump(2) + "\n");
      rec.artifact_dir = dir;
    }
    return out;
  } catch (const std::exception& e) {
    throw Error("run " + run_id + ": " + e.what());
  }
}

std::size_t ExperimentReport::failures() const {
  return static_cast<std::size_t>(std::ranges::count_if(runs, [](const auto& r) { return !r.ok; }));
}

std::vector<AggregateRow> aggregate(const std::vector<RunRecord>& runs) {
  std::vector<std::string> order;
  std::map<std::string, std::vector<const RunRecord*>> groups;
  for (const auto& r : runs) {
    if (!groups.contains(r.config_id)) order.push_back(r.config_id);
    groups[r.config_id].push_back(&r);
  }

  std::vector<AggregateRow> rows;
  for (const auto& id : order) {
    AggregateRow row;
    row.param_set = id;
    std::vector<const MetricsReport*> ok;
    for (const auto* r : groups[id]) {
      if (r->ok) {
        ok.push_back(&r->metrics);
      } else {
        ++row.failed;
      }
    }
    row.runs = ok.size();
    auto stats = [&](auto field, double& mean, double* sd) {
      if (ok.empty()) return;
      std::vector<double> v;
      for (const auto* m : ok) v.push_back(static_cast<double>(field(*m)));
      const auto [mu, sigma] = mean_std(v);
      mean = mu;
      if (sd) *sd = sigma;
    };
    stats([](const MetricsReport& m) { return m.rmse; }, row.mean_rmse, &row.std_rmse);
    stats([](const MetricsReport& m) { return m.rmse_standardized; }, row.mean_rmse_standardized, nullptr);
    stats([](const MetricsReport& m) { return m.i_ov; }, row.mean_i_ov, &row.std_i_ov);
    stats([](const MetricsReport& m) { return m.i_fsp; }, row.mean_i_fsp, &row.std_i_fsp);
    stats([](const MetricsReport& m) { return m.final_rules; }, row.mean_rules, nullptr);
    stats([](const MetricsReport& m) { return m.final_attributes; }, row.mean_attributes, nullptr);
    rows.push_back(row);
  }
  return rows;
}

ExperimentReport run_points(const Dataset& data, const std::vector<RunPoint>& points, std::size_t jobs,
                            const std::optional<fs::path>& artifact_root) {
  ExperimentReport report;
  report.runs.resize(points.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < points.size(); k = next++) {
      try {
        report.runs[k] = run_single(data, points[k], artifact_root).record;
      } catch (const std::exception& e) {
        auto& rec = report.runs[k];
        rec.dataset = data.name;
        rec.config_id = points[k].config_id;
        rec.repeat = points[k].repeat;
        rec.seed = points[k].cfg.seed;
        rec.ok = false;
        rec.error = e.what();
      }
    }
  };
  const auto threads = std::max<std::size_t>(1, std::min(jobs, points.size()));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  report.aggregates = aggregate(report.runs);
  return report;
}

namespace {

ExperimentReport run_expanded(const ExperimentSpec& spec, const std::vector<RunPoint>& points) {
  const auto data = load_dataset(spec.dataset);
  std::optional<fs::path> root;
  if (spec.write_run_artifacts) root = spec.out_dir / "runs";
  return run_points(data, points, spec.jobs, root);
}

}  // namespace

ExperimentReport run_train(const ExperimentSpec& spec) { return run_expanded(spec, expand_train(spec)); }
ExperimentReport run_ablation(const ExperimentSpec& spec) { return run_expanded(spec, expand_ablation(spec)); }
ExperimentReport run_grid(const ExperimentSpec& spec) { return run_expanded(spec, expand_grid(spec)); }

ReportFormat report_format_from_string(std::string_view name) {
  if (name == "csv") return ReportFormat::csv;
  if (name == "json") return ReportFormat::json;
  if (name == "both") return ReportFormat::both;
  throw ConfigError("unknown report format: " + std::string(name));
}

namespace {

std::string num(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return {buf, res.ptr};
}

double parse_double(const std::string& s) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw SchemaError("runs CSV: bad number '" + s + "'");
  return v;
}

constexpr std::string_view kAggregateHeader =
    "Param_Set,Average_Test_RMSE,Average_I_ov,Average_I_fsp,Average_Final_Rules,Average_Final_Attributes,"
    "Std_Test_RMSE,Std_I_ov,Std_I_fsp,Average_Test_RMSE_Standardized,Runs,Failed";

constexpr std::string_view kRunsHeader =
    "dataset,config_id,seed,rmse,i_ov,i_fsp,final_rules,final_attributes,rmse_standardized,repeat";

}  // namespace

std::string aggregate_csv(const std::vector<AggregateRow>& rows) {
  std::string out(kAggregateHeader);
  out += '\n';
  for (const auto& r : rows) {
    out += csv_escape(r.param_set) + ',' + num(r.mean_rmse) + ',' + num(r.mean_i_ov) + ',' + num(r.mean_i_fsp) + ',' +
           num(r.mean_rules) + ',' + num(r.mean_attributes) + ',' + num(r.std_rmse) + ',' + num(r.std_i_ov) + ',' +
           num(r.std_i_fsp) + ',' + num(r.mean_rmse_standardized) + ',' + std::to_string(r.runs) + ',' +
           std::to_string(r.failed) + '\n';
  }
  return out;
}

nlohmann::json aggregate_json(const std::vector<AggregateRow>& rows) {
  auto arr = nlohmann::json::array();
  for (const auto& r : rows) {
    arr.push_back({{"Param_Set", r.param_set},
                   {"Average_Test_RMSE", r.mean_rmse},
                   {"Average_I_ov", r.mean_i_ov},
                   {"Average_I_fsp", r.mean_i_fsp},
                   {"Average_Final_Rules", r.mean_rules},
                   {"Average_Final_Attributes", r.mean_attributes},
                   {"Std_Test_RMSE", r.std_rmse},
                   {"Std_I_ov", r.std_i_ov},
                   {"Std_I_fsp", r.std_i_fsp},
                   {"Average_Test_RMSE_Standardized", r.mean_rmse_standardized},
                   {"Runs", r.runs},
                   {"Failed", r.failed}});
  }
  return arr;
}

std::string runs_csv(const std::vector<RunRecord>& runs) {
  std::string out(kRunsHeader);
  out += '\n';
  for (const auto& r : runs) {
    if (!r.ok) continue;
    const auto& m = r.metrics;
    out += csv_escape(r.dataset) + ',' + csv_escape(r.config_id) + ',' + std::to_string(r.seed) + ',' + num(m.rmse) +
           ',' + num(m.i_ov) + ',' + num(m.i_fsp) + ',' + std::to_string(m.final_rules) + ',' +
           std::to_string(m.final_attributes) + ',' + num(m.rmse_standardized) + ',' + std::to_string(r.repeat) +
           '\n';
  }
  return out;
}

std::vector<RunRecord> parse_runs_csv(std::string_view text) {
  const auto rows = parse_csv(text);
  if (rows.empty()) throw SchemaError("runs CSV is empty");
  std::string header;
  for (std::size_t k = 0; k < rows[0].size(); ++k) header += (k ? "," : "") + rows[0][k];
  if (header != kRunsHeader) throw SchemaError("runs CSV header does not match the expected layout");
  std::vector<RunRecord> out;
  for (std::size_t k = 1; k < rows.size(); ++k) {
    const auto& row = rows[k];
    if (row.size() != 10) throw SchemaError("runs CSV row " + std::to_string(k) + " has the wrong field count");
    RunRecord r;
    r.dataset = row[0];
    r.config_id = row[1];
    r.seed = std::stoull(row[2]);
    r.metrics.rmse = parse_double(row[3]);
    r.metrics.i_ov = parse_double(row[4]);
    r.metrics.i_fsp = parse_double(row[5]);
    r.metrics.final_rules = std::stoull(row[6]);
    r.metrics.final_attributes = std::stoull(row[7]);
    r.metrics.rmse_standardized = parse_double(row[8]);
    r.repeat = std::stoull(row[9]);
    r.ok = true;
    out.push_back(std::move(r));
  }
  return out;
}

void emit_report(const ExperimentReport& report, const fs::path& dir, ReportFormat format) {
  if (report.runs.empty()) throw ConfigError("emit_report: report has no runs");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("cannot create output directory " + dir.string() + ": " + ec.message());

  if (format != ReportFormat::json) {
    write_file(dir / "aggregate.csv", aggregate_csv(report.aggregates));
    write_file(dir / "runs.csv", runs_csv(report.runs));
  }
  if (format != ReportFormat::csv) {
    write_file(dir / "aggregate.json", aggregate_json(report.aggregates).dump(2) + "\n");
    auto runs = nlohmann::json::array();
    for (const auto& r : report.runs) {
      nlohmann::json j = {{"dataset", r.dataset}, {"config_id", r.config_id}, {"seed", r.seed},
                          {"repeat", r.repeat},   {"ok", r.ok}};
      if (r.ok) {
        j["metrics"] = to_json(r.metrics);
        j["events"] = {{"grow", r.grow_events},
                       {"prune_rule", r.prune_rule_events},
                       {"prune_attr", r.prune_attr_events},
                       {"rollback", r.rollback_events}};
      } else {
        j["error"] = r.error;
      }
      runs.push_back(j);
    }
    write_file(dir / "runs.json", runs.dump(2) + "\n");
  }
  if (report.failures() > 0) {
    std::string out = "config_id,repeat,seed,error\n";
    for (const auto& r : report.runs) {
      if (!r.ok) {
        out += csv_escape(r.config_id) + ',' + std::to_string(r.repeat) + ',' + std::to_string(r.seed) + ',' +
               csv_escape(r.error) + '\n';
      }
    }
    write_file(dir / "failures.csv", out);
  }
}

}  // namespace adar
