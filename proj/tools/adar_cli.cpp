// Command-line front end: train, ablate, grid and report.

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "adar/error.hpp"
#include "adar/experiment.hpp"

namespace {

using adar::ExperimentSpec;

struct Options {
  std::string config_path;
  std::string dataset;
  std::string schema_path;
  std::string out;
  std::string format = "both";
  std::size_t jobs = 1;
  std::size_t repeats = 1;
  std::uint64_t seed = 0;
  std::vector<std::size_t> max_rules;

  double lr = 0.0;
  std::size_t batch = 0;
  std::size_t epochs = 0;
  double theta_attr = 0.0;
  double theta_rule = 0.0;
  double l1_attr = 0.0;
  double l1_rule = 0.0;
  std::vector<double> g_thres;
  std::vector<double> pr_thres;
  std::vector<std::size_t> pr_freq;
  std::vector<double> pa_thres;
  std::vector<std::size_t> pa_freq;
  std::size_t synth_rows = 0;
  std::size_t synth_attrs = 0;
  double synth_noise = 0.0;
  bool no_ap = false;
  bool no_rgrp = false;
  bool use_bias = false;
  std::string attr_weighting;
  bool no_artifacts = false;
};

struct Bound {
  CLI::App* app;
  std::vector<std::pair<std::string, CLI::Option*>> opts;
  bool given(const std::string& name) const {
    for (const auto& [n, o] : opts) {
      if (n == name) return o->count() > 0;
    }
    return false;
  }
};

Bound add_run_options(CLI::App* app, Options& o, bool grid_axes) {
  Bound b{app, {}};
  auto add = [&](const std::string& name, CLI::Option* opt) { b.opts.emplace_back(name, opt); };
  add("config", app->add_option("--config", o.config_path, "JSON experiment file; flags override it")
                    ->check(CLI::ExistingFile));
  add("dataset", app->add_option("--dataset", o.dataset, "CSV path, or synthetic:piecewise_linear|gaussian_bumps"));
  add("schema", app->add_option("--schema", o.schema_path, "JSON schema for the CSV (target, features, missing)")
                    ->check(CLI::ExistingFile));
  add("out", app->add_option("--out", o.out, "output directory"));
  add("format", app->add_option("--format", o.format, "report format")->check(CLI::IsMember({"csv", "json", "both"})));
  add("jobs", app->add_option("--jobs", o.jobs, "concurrent runs")->check(CLI::PositiveNumber));
  add("repeats", app->add_option("--repeats", o.repeats, "repeats per configuration")->check(CLI::PositiveNumber));
  add("seed", app->add_option("--seed", o.seed, "base seed"));
  add("max-rules", app->add_option("--max-rules", o.max_rules, "one or more rule caps")->delimiter(','));
  add("lr", app->add_option("--lr", o.lr, "Adam learning rate"));
  add("batch-size", app->add_option("--batch-size", o.batch, "mini-batch size"));
  add("epochs", app->add_option("--epochs", o.epochs, "training epochs"));
  add("theta-attr", app->add_option("--theta-attr", o.theta_attr, "attribute pruning threshold"));
  add("theta-rule", app->add_option("--theta-rule", o.theta_rule, "rule pruning threshold"));
  add("l1-attr", app->add_option("--l1-attr", o.l1_attr, "L1 strength on attribute weights (default 0.01)"));
  add("l1-rule", app->add_option("--l1-rule", o.l1_rule, "L1 strength on rule weights (default 0.0001)"));
  add("synthetic-rows", app->add_option("--synthetic-rows", o.synth_rows, "rows for a synthetic dataset"));
  add("synthetic-attrs", app->add_option("--synthetic-attrs", o.synth_attrs, "attributes for a synthetic dataset"));
  add("synthetic-noise", app->add_option("--synthetic-noise", o.synth_noise, "noise std for a synthetic dataset"));
  add("no-ap", app->add_flag("--no-ap", o.no_ap, "disable attribute pruning"));
  add("no-rgrp", app->add_flag("--no-rgrp", o.no_rgrp, "disable rule growing and pruning"));
  add("use-bias", app->add_flag("--use-bias", o.use_bias, "add a per-rule intercept"));
  add("attr-weighting", app->add_option("--attr-weighting", o.attr_weighting,
                                        "attribute weight as a membership factor or as an exponent (default exponent)")
                            ->check(CLI::IsMember({"factor", "exponent"})));
  add("no-artifacts", app->add_flag("--no-artifacts", o.no_artifacts, "skip per-run model and event files"));
  if (grid_axes) {
    add("g-thres", app->add_option("--g-thres", o.g_thres, "growth thresholds")->delimiter(','));
    add("pr-thres", app->add_option("--pr-thres", o.pr_thres, "rule pruning thresholds")->delimiter(','));
    add("pr-freq", app->add_option("--pr-freq", o.pr_freq, "rule pruning frequencies")->delimiter(','));
    add("pa-thres", app->add_option("--pa-thres", o.pa_thres, "attribute pruning thresholds")->delimiter(','));
    add("pa-freq", app->add_option("--pa-freq", o.pa_freq, "attribute pruning frequencies")->delimiter(','));
  } else {
    add("g-thres", app->add_option("--g-thres", o.g_thres, "growth threshold")->expected(1));
    add("pr-thres", app->add_option("--pr-thres", o.pr_thres, "rule pruning threshold (alias of --theta-rule)")
                        ->expected(1));
    add("pr-freq", app->add_option("--pr-freq", o.pr_freq, "rule pruning frequency")->expected(1));
    add("pa-thres", app->add_option("--pa-thres", o.pa_thres, "attribute pruning threshold (alias of --theta-attr)")
                        ->expected(1));
    add("pa-freq", app->add_option("--pa-freq", o.pa_freq, "attribute pruning frequency")->expected(1));
  }
  return b;
}

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw adar::Error("cannot open " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw adar::ConfigError(path + ": " + e.what());
  }
}

ExperimentSpec build_spec(const Bound& b, const Options& o, std::size_t default_repeats, const std::string& verb) {
  const auto file = b.given("config") ? read_json(o.config_path) : nlohmann::json::object();
  ExperimentSpec spec = adar::experiment_spec_from_json(file);
  if (!file.contains("repeats")) spec.repeats = default_repeats;
  if (!file.contains("out")) spec.out_dir = "results/" + verb;

  if (b.given("dataset")) {
    const std::string prefix = "synthetic:";
    spec.dataset = {};
    if (o.dataset.rfind(prefix, 0) == 0) {
      spec.dataset.synthetic = adar::synth_kind_from_string(o.dataset.substr(prefix.size()));
    } else {
      spec.dataset.path = o.dataset;
    }
  }
  if (b.given("schema")) adar::from_json(read_json(o.schema_path), spec.dataset.schema);
  if (b.given("synthetic-rows")) spec.dataset.synthetic_rows = o.synth_rows;
  if (b.given("synthetic-attrs")) spec.dataset.synthetic_attrs = o.synth_attrs;
  if (b.given("synthetic-noise")) spec.dataset.synthetic_noise = o.synth_noise;
  if (b.given("out")) spec.out_dir = o.out;
  if (b.given("jobs")) spec.jobs = o.jobs;
  if (b.given("repeats")) spec.repeats = o.repeats;
  if (b.given("seed")) spec.base_seed = o.seed;
  if (b.given("max-rules")) spec.max_rules = o.max_rules;
  if (b.given("no-artifacts")) spec.write_run_artifacts = false;

  auto& c = spec.base;
  if (b.given("lr")) c.learning_rate = o.lr;
  if (b.given("batch-size")) c.batch_size = o.batch;
  if (b.given("epochs")) c.epochs = o.epochs;
  if (b.given("theta-attr")) c.theta_attr = o.theta_attr;
  if (b.given("theta-rule")) c.theta_rule = o.theta_rule;
  if (b.given("l1-attr")) c.l1_attr = o.l1_attr;
  if (b.given("l1-rule")) c.l1_rule = o.l1_rule;
  if (b.given("no-ap")) c.ap_enabled = false;
  if (b.given("no-rgrp")) c.rgrp_enabled = false;
  if (b.given("use-bias")) c.use_bias = true;
  if (b.given("attr-weighting")) c.alpha_in_exponent = o.attr_weighting == "exponent";

  auto& g = spec.grid;
  if (b.given("g-thres")) g.growth_threshold = o.g_thres;
  if (b.given("pr-thres")) g.prune_rule_threshold = o.pr_thres;
  if (b.given("pr-freq")) g.prune_rule_freq = o.pr_freq;
  if (b.given("pa-thres")) g.prune_attr_threshold = o.pa_thres;
  if (b.given("pa-freq")) g.prune_attr_freq = o.pa_freq;
  if (verb != "grid") {
    // Outside the grid the axis flags set the single training configuration.
    if (b.given("g-thres")) c.growth_threshold = o.g_thres.front();
    if (b.given("pr-thres")) c.theta_rule = o.pr_thres.front();
    if (b.given("pr-freq")) c.prune_rule_freq = o.pr_freq.front();
    if (b.given("pa-thres")) c.theta_attr = o.pa_thres.front();
    if (b.given("pa-freq")) c.prune_attr_freq = o.pa_freq.front();
  }
  if (spec.repeats == 0) throw adar::ConfigError("--repeats must be at least 1");
  c.validate();
  return spec;
}

void print_summary(const adar::ExperimentReport& report, const std::filesystem::path& out) {
  for (const auto& row : report.aggregates) {
    std::cout << row.param_set << "  rmse " << row.mean_rmse << " +/- " << row.std_rmse << "  I_ov " << row.mean_i_ov
              << "  I_fsp " << row.mean_i_fsp << "  rules " << row.mean_rules << "  attrs " << row.mean_attributes
              << "  runs " << row.runs;
    if (row.failed) std::cout << "  failed " << row.failed;
    std::cout << '\n';
  }
  for (const auto& r : report.runs) {
    if (!r.ok) std::cerr << "failed: " << r.error << '\n';
  }
  std::cout << "reports written to " << out.string() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neuro-fuzzy regression with adaptive attribute and rule structure"};
  app.require_subcommand(1);

  Options train_o, ablate_o, grid_o;
  auto* train = app.add_subcommand("train", "repeated runs of one configuration");
  auto* ablate = app.add_subcommand("ablate", "the four mechanism ablations");
  auto* grid = app.add_subcommand("grid", "sensitivity grid over growth and pruning settings");
  const auto train_b = add_run_options(train, train_o, false);
  const auto ablate_b = add_run_options(ablate, ablate_o, false);
  const auto grid_b = add_run_options(grid, grid_o, true);

  auto* report = app.add_subcommand("report", "re-aggregate an existing runs.csv");
  std::string runs_path, report_out, report_format = "both";
  report->add_option("runs", runs_path, "runs.csv written by a previous invocation")->required()->check(
      CLI::ExistingFile);
  report->add_option("--out", report_out, "output directory (default: next to runs.csv)");
  report->add_option("--format", report_format, "report format")->check(CLI::IsMember({"csv", "json", "both"}));

  CLI11_PARSE(app, argc, argv);

  try {
    if (report->parsed()) {
      std::ifstream in(runs_path, std::ios::binary);
      std::stringstream ss;
      ss << in.rdbuf();
      adar::ExperimentReport rep;
      rep.runs = adar::parse_runs_csv(ss.str());
      rep.aggregates = adar::aggregate(rep.runs);
      const std::filesystem::path out =
          report_out.empty() ? std::filesystem::path(runs_path).parent_path() / "report" : std::filesystem::path(report_out);
      adar::emit_report(rep, out, adar::report_format_from_string(report_format));
      print_summary(rep, out);
      return 0;
    }

    adar::ExperimentReport rep;
    ExperimentSpec spec;
    std::string format;
    if (train->parsed()) {
      spec = build_spec(train_b, train_o, 1, "train");
      format = train_o.format;
      rep = adar::run_train(spec);
    } else if (ablate->parsed()) {
      spec = build_spec(ablate_b, ablate_o, 5, "ablate");
      format = ablate_o.format;
      rep = adar::run_ablation(spec);
    } else {
      spec = build_spec(grid_b, grid_o, 3, "grid");
      format = grid_o.format;
      rep = adar::run_grid(spec);
    }
    adar::emit_report(rep, spec.out_dir, adar::report_format_from_string(format));
    print_summary(rep, spec.out_dir);
    return rep.failures() == 0 ? 0 : 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
