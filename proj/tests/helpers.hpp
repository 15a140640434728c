#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "adar/matrix.hpp"
#include "adar/rule_base.hpp"

namespace testing {

/// Random rule base with unit-scale parameters; masks stay all-on unless
/// mask_probability > 0, in which case each entry is cleared with that
/// probability (keeping at least one active attribute per rule).
inline adar::RuleBase random_rule_base(std::mt19937_64& rng, std::size_t L, std::size_t D,
                                       double mask_probability = 0.0) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> width(0.5, 1.5);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  adar::RuleBase rb(L, D);
  for (std::size_t l = 0; l < L; ++l) {
    rb.rule_logits[l] = normal(rng);
    rb.bias[l] = normal(rng);
    for (std::size_t i = 0; i < D; ++i) {
      rb.centers(l, i) = normal(rng);
      rb.widths(l, i) = width(rng);
      rb.attr_logits(l, i) = normal(rng);
      rb.consequents(l, i) = normal(rng);
      if (unit(rng) < mask_probability) rb.set_active(l, i, false);
    }
    if (rb.active_count(l) == 0) rb.set_active(l, 0, true);
  }
  return rb;
}

inline adar::Matrix random_matrix(std::mt19937_64& rng, std::size_t rows, std::size_t cols, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  adar::Matrix X(rows, cols);
  for (auto& v : X.data()) v = normal(rng);
  return X;
}

inline std::vector<double> random_vector(std::mt19937_64& rng, std::size_t n, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  std::vector<double> v(n);
  for (auto& x : v) x = normal(rng);
  return v;
}

}  // namespace testing
