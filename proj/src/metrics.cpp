#include "adar/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "adar/error.hpp"

namespace adar {

double rmse(std::span<const double> pred, std::span<const double> actual) {
  if (pred.size() != actual.size()) throw ShapeError("rmse: prediction and target lengths differ");
  if (pred.empty()) throw ShapeError("rmse: empty input");
  double sum = 0.0;
  for (std::size_t n = 0; n < pred.size(); ++n) {
    const double r = pred[n] - actual[n];
    sum += r * r;
  }
  return std::sqrt(sum / static_cast<double>(pred.size()));
}

namespace {

constexpr int kMaxDepth = 50;

double simpson_recurse(const std::function<double(double)>& f, double a, double b, double fa, double fm,
                       double fb, double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth >= kMaxDepth || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  return simpson_recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth + 1) +
         simpson_recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth + 1);
}

// Points where two Gaussians cross; min(mu1, mu2) has kinks only there.
std::vector<double> crossings(Gaussian g1, Gaussian g2) {
  // (x - v1)^2 / s1^2 = (x - v2)^2 / s2^2  ->  a x^2 + b x + c = 0
  const double p = 1.0 / (g1.width * g1.width);
  const double q = 1.0 / (g2.width * g2.width);
  const double a = p - q;
  const double b = -2.0 * (p * g1.center - q * g2.center);
  const double c = p * g1.center * g1.center - q * g2.center * g2.center;
  if (std::abs(a) < 1e-14 * std::max(p, q)) {
    if (std::abs(b) < 1e-300) return {};
    return {-c / b};
  }
  const double disc = b * b - 4.0 * a * c;
  if (disc < 0.0) return {};
  const double r = std::sqrt(disc);
  return {(-b - r) / (2.0 * a), (-b + r) / (2.0 * a)};
}

}  // namespace

double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double tol) {
  if (b <= a) return 0.0;
  const double fa = f(a);
  const double fb = f(b);
  const double fm = f(0.5 * (a + b));
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return simpson_recurse(f, a, b, fa, fm, fb, whole, tol, 0);
}

std::pair<double, double> overlap_window(Gaussian g1, Gaussian g2) {
  const double smax = std::max(g1.width, g2.width);
  return {std::min(g1.center, g2.center) - 8.0 * smax, std::max(g1.center, g2.center) + 8.0 * smax};
}

double pairwise_overlap(Gaussian g1, Gaussian g2) {
  if (g1.center == g2.center && g1.width == g2.width) return 1.0;
  const auto [lo, hi] = overlap_window(g1, g2);
  const double denom = std::min(g1.width, g2.width) * std::sqrt(2.0 * std::numbers::pi);

  // Split at the centers and crossing points so every piece is smooth and no
  // narrow peak can hide between Simpson nodes.
  std::vector<double> cuts{lo, hi, g1.center, g2.center};
  for (double x : crossings(g1, g2)) cuts.push_back(x);
  std::erase_if(cuts, [&](double x) { return !(x >= lo && x <= hi); });
  std::ranges::sort(cuts);
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  auto f = [&](double x) { return std::min(membership(x, g1.center, g1.width), membership(x, g2.center, g2.width)); };
  const double tol = 1e-6 * denom / static_cast<double>(cuts.size() - 1);
  double area = 0.0;
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) area += adaptive_simpson(f, cuts[k], cuts[k + 1], tol);
  return std::clamp(area / denom, 0.0, 1.0);
}

namespace {

std::vector<Gaussian> active_sets(const RuleBase& rb, std::size_t d) {
  std::vector<Gaussian> sets;
  for (std::size_t l = 0; l < rb.num_rules(); ++l) {
    if (rb.active(l, d)) sets.push_back({rb.centers(l, d), rb.widths(l, d)});
  }
  return sets;
}

}  // namespace

double overlap_index(const RuleBase& rb) {
  if (rb.num_rules() < 2 || rb.num_attrs() == 0) return 0.0;
  double total = 0.0;
  for (std::size_t d = 0; d < rb.num_attrs(); ++d) {
    const auto sets = active_sets(rb, d);
    double best = 0.0;
    for (std::size_t i = 0; i < sets.size(); ++i) {
      for (std::size_t j = i + 1; j < sets.size(); ++j) best = std::max(best, pairwise_overlap(sets[i], sets[j]));
    }
    total += best;
  }
  return total / static_cast<double>(rb.num_attrs());
}

double fsp_pair_term(Gaussian lower, Gaussian upper) {
  const double dv = lower.center - upper.center;
  const double sum = lower.width + upper.width;
  const double phi = std::exp(-0.5 * (dv / sum) * (dv / sum));
  const double diff = lower.width - upper.width;
  double psi = 0.0;
  if (std::abs(diff) < 1e-12) {
    psi = dv == 0.0 ? 1.0 : 0.0;
  } else {
    psi = std::exp(-0.5 * (dv / diff) * (dv / diff));
  }
  return 2.0 * (0.5 - phi + psi);
}

double fsp_index(const RuleBase& rb) {
  if (rb.num_rules() < 2 || rb.num_attrs() == 0) return 0.0;
  double total = 0.0;
  for (std::size_t d = 0; d < rb.num_attrs(); ++d) {
    auto sets = active_sets(rb, d);
    // width breaks center ties so the result does not depend on rule order
    std::ranges::sort(sets, [](const Gaussian& a, const Gaussian& b) {
      return a.center != b.center ? a.center < b.center : a.width < b.width;
    });
    for (std::size_t k = 0; k + 1 < sets.size(); ++k) total += fsp_pair_term(sets[k], sets[k + 1]);
  }
  return total / static_cast<double>(rb.num_rules() * rb.num_attrs());
}

StructuralCounts structural_counts(const RuleBase& rb) { return {rb.num_rules(), rb.active_total()}; }

nlohmann::json to_json(const MetricsReport& m) {
  return {{"rmse", m.rmse},       {"rmse_standardized", m.rmse_standardized}, {"i_ov", m.i_ov},
          {"i_fsp", m.i_fsp},     {"final_rules", m.final_rules},            {"final_attributes", m.final_attributes}};
}

}  // namespace adar
