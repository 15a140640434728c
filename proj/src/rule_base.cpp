#include "adar/rule_base.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "adar/error.hpp"

namespace adar {

RuleBase::RuleBase(std::size_t num_rules, std::size_t num_attrs)
    : centers(num_rules, num_attrs),
      widths(num_rules, num_attrs, 1.0),
      attr_logits(num_rules, num_attrs),
      attr_mask(num_rules * num_attrs, 1),
      rule_logits(num_rules, 0.0),
      consequents(num_rules, num_attrs),
      bias(num_rules, 0.0) {}

std::size_t RuleBase::active_count(std::size_t l) const {
  const auto d = num_attrs();
  return static_cast<std::size_t>(
      std::count(attr_mask.begin() + static_cast<std::ptrdiff_t>(l * d),
                 attr_mask.begin() + static_cast<std::ptrdiff_t>((l + 1) * d), std::uint8_t{1}));
}

std::size_t RuleBase::active_total() const {
  return static_cast<std::size_t>(std::count(attr_mask.begin(), attr_mask.end(), std::uint8_t{1}));
}

void RuleBase::append_rule(std::span<const double> center, std::span<const double> width,
                           std::span<const double> attr_logit, double rule_logit,
                           std::span<const double> consequent, double bias_value) {
  const auto d = num_rules() == 0 && centers.cols() == 0 ? center.size() : num_attrs();
  if (center.size() != d || width.size() != d || attr_logit.size() != d || consequent.size() != d) {
    throw ShapeError("append_rule: row length does not match attribute count");
  }
  centers.append_row(center);
  widths.append_row(width);
  attr_logits.append_row(attr_logit);
  consequents.append_row(consequent);
  attr_mask.insert(attr_mask.end(), d, std::uint8_t{1});
  rule_logits.push_back(rule_logit);
  bias.push_back(bias_value);
  const auto l = num_rules() - 1;
  for (std::size_t i = 0; i < d; ++i) widths(l, i) = std::max(widths(l, i), width_floor);
}

void RuleBase::remove_rule(std::size_t l) {
  if (l >= num_rules()) throw ShapeError("remove_rule: rule index out of range");
  const auto d = num_attrs();
  centers.erase_row(l);
  widths.erase_row(l);
  attr_logits.erase_row(l);
  consequents.erase_row(l);
  auto first = attr_mask.begin() + static_cast<std::ptrdiff_t>(l * d);
  attr_mask.erase(first, first + static_cast<std::ptrdiff_t>(d));
  rule_logits.erase(rule_logits.begin() + static_cast<std::ptrdiff_t>(l));
  bias.erase(bias.begin() + static_cast<std::ptrdiff_t>(l));
}

void RuleBase::clamp_widths() {
  for (auto& s : widths.data()) s = std::max(s, width_floor);
}

void RuleBase::validate() const {
  const auto l = num_rules();
  const auto d = num_attrs();
  if (l == 0 || d == 0) throw ConfigError("rule base needs at least one rule and one attribute");
  auto shaped = [&](const Matrix& m) { return m.rows() == l && m.cols() == d; };
  if (!shaped(centers) || !shaped(widths) || !shaped(attr_logits) || !shaped(consequents) ||
      attr_mask.size() != l * d || bias.size() != l) {
    throw ShapeError("rule base parameter blocks disagree in shape");
  }
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
  if (!(width_floor > 0.0)) throw ConfigError("width floor must be positive");
  for (double s : widths.data()) {
    if (!(s >= width_floor)) throw ConfigError("width below floor");
  }
  for (auto m : attr_mask) {
    if (m > 1) throw ConfigError("attribute mask entries must be 0 or 1");
  }
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double membership(double x, double center, double width) {
  const double u = (x - center) / width;
  return std::exp(-0.5 * u * u);
}

Matrix compute_attribute_weights(const RuleBase& rb) {
  Matrix alpha(rb.num_rules(), rb.num_attrs());
  for (std::size_t l = 0; l < rb.num_rules(); ++l) {
    for (std::size_t i = 0; i < rb.num_attrs(); ++i) {
      alpha(l, i) = rb.active(l, i) ? sigmoid(rb.attr_logits(l, i)) : 0.0;
    }
  }
  return alpha;
}

std::vector<double> compute_rule_weights(const RuleBase& rb) {
  std::vector<double> beta(rb.num_rules());
  std::ranges::transform(rb.rule_logits, beta.begin(), sigmoid);
  return beta;
}

namespace {

void check_width(const RuleBase& rb, std::span<const double> x) {
  if (x.size() != rb.num_attrs()) {
    throw ShapeError("input has " + std::to_string(x.size()) + " attributes, rule base expects " +
                     std::to_string(rb.num_attrs()));
  }
}

// Fills mu and firing given precomputed alpha.
void fire(const RuleBase& rb, const Matrix& alpha, std::span<const double> x, Matrix& mu,
          std::vector<double>& firing) {
  const auto d = rb.num_attrs();
  for (std::size_t l = 0; l < rb.num_rules(); ++l) {
    double f = 1.0;
    std::size_t used = 0;
    for (std::size_t i = 0; i < d; ++i) {
      const double m = membership(x[i], rb.centers(l, i), rb.widths(l, i));
      mu(l, i) = m;
      if (rb.active(l, i)) {
        f *= rb.alpha_in_exponent ? std::pow(m, alpha(l, i)) : m * alpha(l, i);
        ++used;
      } else if (rb.strict_mask_product) {
        f = 0.0;
      }
    }
    firing[l] = used == 0 ? 0.0 : f;
  }
}

double rule_output(const RuleBase& rb, std::size_t l, std::span<const double> x) {
  double y = rb.use_bias ? rb.bias[l] : 0.0;
  for (std::size_t i = 0; i < rb.num_attrs(); ++i) {
    if (rb.active(l, i)) y += rb.consequents(l, i) * x[i];
  }
  return y;
}

InferenceTrace infer_with(const RuleBase& rb, const Matrix& alpha, const std::vector<double>& beta,
                          std::span<const double> x) {
  const auto L = rb.num_rules();
  InferenceTrace t;
  t.alpha = alpha;
  t.beta = beta;
  t.mu = Matrix(L, rb.num_attrs());
  t.firing.resize(L);
  fire(rb, alpha, x, t.mu, t.firing);
  t.weighted_firing.resize(L);
  double total = 0.0;
  for (std::size_t l = 0; l < L; ++l) {
    t.weighted_firing[l] = t.firing[l] * beta[l];
    total += t.weighted_firing[l];
  }
  t.normalizer = total + rb.epsilon;
  t.activation.resize(L);
  t.rule_output.resize(L);
  double y = 0.0;
  for (std::size_t l = 0; l < L; ++l) {
    t.activation[l] = t.weighted_firing[l] / t.normalizer;
    t.rule_output[l] = rule_output(rb, l, x);
    y += t.activation[l] * t.rule_output[l];
  }
  t.y = y;
  return t;
}

// Allocation-light forward pass used for batches; same arithmetic order as infer_with.
double predict_with(const RuleBase& rb, const Matrix& alpha, const std::vector<double>& beta,
                    std::span<const double> x, Matrix& mu, std::vector<double>& firing) {
  const auto L = rb.num_rules();
  fire(rb, alpha, x, mu, firing);
  double total = 0.0;
  for (std::size_t l = 0; l < L; ++l) {
    firing[l] *= beta[l];
    total += firing[l];
  }
  const double norm = total + rb.epsilon;
  double y = 0.0;
  for (std::size_t l = 0; l < L; ++l) y += (firing[l] / norm) * rule_output(rb, l, x);
  return y;
}

}  // namespace

std::vector<double> firing_strengths(const RuleBase& rb, std::span<const double> x) {
  check_width(rb, x);
  Matrix mu(rb.num_rules(), rb.num_attrs());
  std::vector<double> firing(rb.num_rules());
  fire(rb, compute_attribute_weights(rb), x, mu, firing);
  return firing;
}

std::vector<double> normalized_activations(std::span<const double> firing,
                                           std::span<const double> rule_weights, double epsilon) {
  if (firing.size() != rule_weights.size()) throw ShapeError("firing and rule weight lengths differ");
  std::vector<double> w(firing.size());
  double total = 0.0;
  for (std::size_t l = 0; l < firing.size(); ++l) {
    w[l] = firing[l] * rule_weights[l];
    total += w[l];
  }
  const double norm = total + epsilon;
  for (auto& v : w) v /= norm;
  return w;
}

std::vector<double> rule_outputs(const RuleBase& rb, std::span<const double> x) {
  check_width(rb, x);
  std::vector<double> y(rb.num_rules());
  for (std::size_t l = 0; l < rb.num_rules(); ++l) y[l] = rule_output(rb, l, x);
  return y;
}

InferenceTrace infer(const RuleBase& rb, std::span<const double> x) {
  check_width(rb, x);
  return infer_with(rb, compute_attribute_weights(rb), compute_rule_weights(rb), x);
}

double predict(const RuleBase& rb, std::span<const double> x) {
  check_width(rb, x);
  Matrix mu(rb.num_rules(), rb.num_attrs());
  std::vector<double> firing(rb.num_rules());
  return predict_with(rb, compute_attribute_weights(rb), compute_rule_weights(rb), x, mu, firing);
}

std::vector<double> predict_batch(const RuleBase& rb, const Matrix& X) {
  if (X.rows() == 0) return {};
  if (X.cols() != rb.num_attrs()) {
    throw ShapeError("batch has " + std::to_string(X.cols()) + " columns, rule base expects " +
                     std::to_string(rb.num_attrs()));
  }
  const auto alpha = compute_attribute_weights(rb);
  const auto beta = compute_rule_weights(rb);
  Matrix mu(rb.num_rules(), rb.num_attrs());
  std::vector<double> firing(rb.num_rules());
  std::vector<double> out(X.rows());
  for (std::size_t n = 0; n < X.rows(); ++n) out[n] = predict_with(rb, alpha, beta, X.row(n), mu, firing);
  return out;
}

namespace {

nlohmann::json matrix_json(const Matrix& m) {
  auto rows = nlohmann::json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    rows.push_back(std::vector<double>(row.begin(), row.end()));
  }
  return rows;
}

Matrix matrix_from_json(const nlohmann::json& j, std::size_t cols) {
  Matrix m(0, cols);
  for (const auto& row : j) {
    auto values = row.get<std::vector<double>>();
    if (values.size() != cols) throw ShapeError("rule base JSON: ragged parameter matrix");
    m.append_row(values);
  }
  return m;
}

}  // namespace

nlohmann::json to_json(const RuleBase& rb) {
  nlohmann::json mask = nlohmann::json::array();
  for (std::size_t l = 0; l < rb.num_rules(); ++l) {
    std::vector<int> row(rb.num_attrs());
    for (std::size_t i = 0; i < rb.num_attrs(); ++i) row[i] = rb.active(l, i) ? 1 : 0;
    mask.push_back(row);
  }
  return {
      {"num_rules", rb.num_rules()},
      {"num_attrs", rb.num_attrs()},
      {"v", matrix_json(rb.centers)},
      {"s", matrix_json(rb.widths)},
      {"w_a", matrix_json(rb.attr_logits)},
      {"m", mask},
      {"w_r", rb.rule_logits},
      {"c", matrix_json(rb.consequents)},
      {"c0", rb.bias},
      {"epsilon", rb.epsilon},
      {"width_floor", rb.width_floor},
      {"use_bias", rb.use_bias},
      {"strict_mask_product", rb.strict_mask_product},
      {"alpha_in_exponent", rb.alpha_in_exponent},
  };
}

RuleBase rule_base_from_json(const nlohmann::json& j) {
  try {
    RuleBase rb;
    const auto d = j.at("num_attrs").get<std::size_t>();
    rb.centers = matrix_from_json(j.at("v"), d);
    rb.widths = matrix_from_json(j.at("s"), d);
    rb.attr_logits = matrix_from_json(j.at("w_a"), d);
    rb.consequents = matrix_from_json(j.at("c"), d);
    rb.rule_logits = j.at("w_r").get<std::vector<double>>();
    rb.bias = j.at("c0").get<std::vector<double>>();
    for (const auto& row : j.at("m")) {
      for (int v : row.get<std::vector<int>>()) {
        if (v != 0 && v != 1) throw ShapeError("rule base JSON: mask entries must be 0 or 1");
        rb.attr_mask.push_back(static_cast<std::uint8_t>(v));
      }
    }
    rb.epsilon = j.at("epsilon").get<double>();
    rb.width_floor = j.at("width_floor").get<double>();
    rb.use_bias = j.at("use_bias").get<bool>();
    rb.strict_mask_product = j.at("strict_mask_product").get<bool>();
    rb.alpha_in_exponent = j.value("alpha_in_exponent", false);
    if (rb.num_rules() != j.at("num_rules").get<std::size_t>()) {
      throw ShapeError("rule base JSON: num_rules disagrees with w_r");
    }
    rb.validate();
    return rb;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("rule base JSON: ") + e.what());
  }
}

}  // namespace adar
