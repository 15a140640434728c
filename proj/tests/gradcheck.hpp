#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>

#include "adar/training.hpp"
#include "helpers.hpp"

namespace testing {

/// Relative error with an absolute floor on the denominator. Central
/// differences at h = 1e-5 carry round-off of order 1e-10, so components
/// below the floor (which occur when a single rule's centers and widths act
/// only through epsilon) are compared on an absolute scale instead.
inline double relative_error(double analytic, double numeric, double floor = 1e-5) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

struct GradCheck {
  std::array<double, 6> max_error{};  // per block, in kParamBlockNames order
  double worst() const { return *std::ranges::max_element(max_error); }
};

inline GradCheck compare_gradients(const adar::Gradients& analytic, const adar::Gradients& numeric) {
  GradCheck out;
  const auto a = adar::param_blocks(analytic);
  const auto n = adar::param_blocks(numeric);
  for (std::size_t b = 0; b < a.size(); ++b) {
    for (std::size_t k = 0; k < a[b].size(); ++k) {
      out.max_error[b] = std::max(out.max_error[b], relative_error(a[b][k], n[b][k]));
    }
  }
  return out;
}

struct GradInstance {
  adar::RuleBase rb;
  adar::Matrix X;
  std::vector<double> y;
};

/// Random instance with L in [1, 4], D in [1, 5] and N rows; targets come
/// from a perturbed copy of the model so residuals are moderate.
inline GradInstance random_instance(std::uint64_t seed, std::size_t N, bool exponent, bool bias) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> rules(1, 4), attrs(1, 5);
  GradInstance inst;
  const auto L = rules(rng);
  const auto D = attrs(rng);
  inst.rb = random_rule_base(rng, L, D, 0.2);
  inst.rb.alpha_in_exponent = exponent;
  inst.rb.use_bias = bias;
  inst.X = random_matrix(rng, N, D);
  inst.y = random_vector(rng, N);
  return inst;
}

}  // namespace testing
