#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>

#include "adar/config.hpp"
#include "adar/matrix.hpp"
#include "adar/rule_base.hpp"

namespace adar {

/// Population standard deviation of each column over the listed rows, floored.
std::vector<double> column_std(const Matrix& X, std::span<const std::size_t> rows, double floor);
std::vector<double> column_mean(const Matrix& X, std::span<const std::size_t> rows);

/// k rules from K-means on (standardized) X: centers are the centroids, widths the
/// per-cluster feature std, attribute logits ~ N(0, cfg.attr_logit_init_std),
/// rule logits = cfg.rule_logit_init, consequents ~ N(0, cfg.consequent_init_std).
RuleBase init_rulebase(const Matrix& X, std::size_t k, std::uint64_t seed, const TrainConfig& cfg);

/// Draws a fresh attribute-logit row and consequent row for one rule.
void sample_rule_parameters(std::mt19937_64& rng, const TrainConfig& cfg, std::span<double> attr_logits,
                            std::span<double> consequents);

}  // namespace adar
