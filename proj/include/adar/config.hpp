#pragma once

#include <cstddef>
#include <cstdint>

#include <json.hpp>

#include "adar/rule_base.hpp"

namespace adar {

/// Every hyperparameter of a training run.
struct TrainConfig {
  double learning_rate = 0.01;
  std::size_t batch_size = 512;
  std::size_t epochs = 1500;

  double theta_attr = 0.1;         // attribute pruning threshold on alpha
  double theta_rule = 0.25;        // rule pruning threshold on beta
  double growth_threshold = 5e-5;  // min val-RMSE improvement that resets patience
  std::size_t patience = 30;
  std::size_t max_rules = 5;
  /// Starting rule count when rule growing/pruning is on; fixed runs use max_rules.
  std::size_t initial_rules = 2;
  std::size_t prune_attr_freq = 25;
  std::size_t prune_rule_freq = 50;
  std::size_t persistence_checks = 2;

  /// Stronger than l1_rule: the attribute penalty is what separates useful
  /// from idle attributes before pruning.
  double l1_attr = 1e-2;
  double l1_rule = 1e-4;
  double rollback_tolerance = 0.02;
  /// Samples used to seed a grown rule; 0 selects max(8, batch_size / 64).
  std::size_t grow_topk = 0;

  bool ap_enabled = true;
  bool rgrp_enabled = true;

  double rule_logit_init = 1.0;
  double attr_logit_init_std = 0.5;
  double consequent_init_std = 0.1;
  bool use_bias = false;
  bool strict_mask_product = false;
  /// Attribute weight as the exponent of the membership (see RuleBase).
  bool alpha_in_exponent = true;
  double width_floor = kDefaultWidthFloor;
  double epsilon = kDefaultEpsilon;

  std::uint64_t seed = 0;

  /// Throws ConfigError naming the offending field.
  void validate() const;
  std::size_t effective_grow_topk() const;
  /// Rule count used to build the initial rule base.
  std::size_t starting_rules() const;
};

void to_json(nlohmann::json& j, const TrainConfig& cfg);
/// Missing keys keep their defaults; unknown keys are rejected.
void from_json(const nlohmann::json& j, TrainConfig& cfg);

}  // namespace adar
