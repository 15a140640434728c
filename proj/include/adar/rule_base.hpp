#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "adar/matrix.hpp"

namespace adar {

inline constexpr double kDefaultEpsilon = 1e-9;
inline constexpr double kDefaultWidthFloor = 1e-3;

/// Learnable parameters and masks of a Gaussian TSK rule base.
///
/// Every per-(rule, attribute) block is an L x D matrix. The mask is stored as
/// bytes holding exactly 0 or 1; a masked entry removes the attribute from the
/// rule's antecedent and from its consequent.
struct RuleBase {
  Matrix centers;       // v
  Matrix widths;        // s, always >= width_floor
  Matrix attr_logits;   // pre-sigmoid attribute importance
  std::vector<std::uint8_t> attr_mask;  // L*D, row-major
  std::vector<double> rule_logits;      // pre-sigmoid rule importance
  Matrix consequents;   // linear coefficients c[l][i]
  std::vector<double> bias;             // c0[l]; only read when use_bias

  bool use_bias = false;
  /// Literal product over all attributes: a masked attribute zeroes its rule.
  bool strict_mask_product = false;
  /// How an attribute weight enters the firing strength: as a factor,
  /// mu * alpha, or as an exponent, mu^alpha (alpha scales the Gaussian's
  /// exponent, so a weight near zero makes the rule ignore the attribute).
  bool alpha_in_exponent = false;
  double epsilon = kDefaultEpsilon;
  double width_floor = kDefaultWidthFloor;

  RuleBase() = default;
  /// Zero-initialized rule base with unit widths and all masks set.
  RuleBase(std::size_t num_rules, std::size_t num_attrs);

  std::size_t num_rules() const { return rule_logits.size(); }
  std::size_t num_attrs() const { return centers.cols(); }

  bool active(std::size_t l, std::size_t i) const { return attr_mask[l * num_attrs() + i] != 0; }
  void set_active(std::size_t l, std::size_t i, bool on) { attr_mask[l * num_attrs() + i] = on ? 1 : 0; }
  std::size_t active_count(std::size_t l) const;
  std::size_t active_total() const;

  /// Appends a rule; all row arguments must have num_attrs() entries.
  void append_rule(std::span<const double> center, std::span<const double> width,
                   std::span<const double> attr_logit, double rule_logit,
                   std::span<const double> consequent, double bias_value = 0.0);
  void remove_rule(std::size_t l);

  /// Clamps every width to width_floor.
  void clamp_widths();
  /// Throws ConfigError/ShapeError when an invariant is broken.
  void validate() const;

  bool operator==(const RuleBase&) const = default;
};

double sigmoid(double z);

/// exp(-(x - v)^2 / (2 s^2)).
double membership(double x, double center, double width);

/// alpha[l][i] = sigmoid(w_a[l][i]) * m[l][i].
Matrix compute_attribute_weights(const RuleBase& rb);
/// beta[l] = sigmoid(w_r[l]).
std::vector<double> compute_rule_weights(const RuleBase& rb);

/// Raw firing strength of every rule for one sample (before rule weighting).
std::vector<double> firing_strengths(const RuleBase& rb, std::span<const double> x);
/// w[l] = f[l] beta[l] / (sum_m f[m] beta[m] + eps).
std::vector<double> normalized_activations(std::span<const double> firing,
                                           std::span<const double> rule_weights, double epsilon);
/// Linear consequent of every rule over its active attributes.
std::vector<double> rule_outputs(const RuleBase& rb, std::span<const double> x);

/// Every intermediate of one forward pass, kept for backpropagation.
struct InferenceTrace {
  Matrix alpha;
  Matrix mu;
  std::vector<double> firing;
  std::vector<double> beta;
  std::vector<double> weighted_firing;  // f~
  std::vector<double> activation;       // normalized w
  std::vector<double> rule_output;
  double normalizer = 0.0;  // sum f~ + eps
  double y = 0.0;
};

InferenceTrace infer(const RuleBase& rb, std::span<const double> x);
double predict(const RuleBase& rb, std::span<const double> x);
/// Row-wise predict; throws ShapeError when X.cols() != num_attrs().
std::vector<double> predict_batch(const RuleBase& rb, const Matrix& X);

nlohmann::json to_json(const RuleBase& rb);
RuleBase rule_base_from_json(const nlohmann::json& j);

}  // namespace adar
