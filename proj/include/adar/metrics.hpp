#pragma once

#include <cstddef>
#include <functional>
#include <span>

#include <json.hpp>

#include "adar/rule_base.hpp"

namespace adar {

/// Root mean squared error. Throws ShapeError on length mismatch or empty input.
double rmse(std::span<const double> pred, std::span<const double> actual);

struct Gaussian {
  double center = 0.0;
  double width = 1.0;
};

/// Adaptive Simpson quadrature of f over [a, b] to absolute tolerance tol.
double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double tol);

/// Integration window shared by the overlap quadratures: min(v) - 8 max(s) .. max(v) + 8 max(s).
std::pair<double, double> overlap_window(Gaussian g1, Gaussian g2);

/// Integral of min(mu1, mu2) divided by the smaller of the two (unnormalized)
/// Gaussian areas s * sqrt(2 pi). Lies in [0, 1]; 1 for identical sets.
double pairwise_overlap(Gaussian g1, Gaussian g2);

/// Mean over attributes of the largest pairwise overlap between rules. Masked
/// (rule, attribute) sets take no part; attributes with fewer than two sets
/// contribute 0, and so does a rule base with fewer than two rules.
double overlap_index(const RuleBase& rb);

/// Position index over adjacent fuzzy sets per attribute, sorted by center,
/// normalized by L * D. Masked sets are skipped as for overlap_index.
double fsp_index(const RuleBase& rb);

/// Adjacent-pair term 2 (0.5 - phi + psi) for two sets sorted by center.
double fsp_pair_term(Gaussian lower, Gaussian upper);

struct StructuralCounts {
  std::size_t rules = 0;
  std::size_t attributes = 0;  // active mask entries over all rules
};

StructuralCounts structural_counts(const RuleBase& rb);

struct MetricsReport {
  double rmse = 0.0;               // original target units
  double rmse_standardized = 0.0;  // standardized target units
  double i_ov = 0.0;
  double i_fsp = 0.0;
  std::size_t final_rules = 0;
  std::size_t final_attributes = 0;
};

nlohmann::json to_json(const MetricsReport& m);

}  // namespace adar
