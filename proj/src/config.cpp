#include "adar/config.hpp"

#include <algorithm>
#include <string>

#include "adar/error.hpp"

namespace adar {

namespace {

void require(bool ok, const char* field, const char* what) {
  if (!ok) throw ConfigError(std::string(field) + ": " + what);
}

}  // namespace

void TrainConfig::validate() const {
  require(learning_rate > 0.0, "learning_rate", "must be positive");
  require(batch_size >= 1, "batch_size", "must be at least 1");
  require(theta_attr > 0.0 && theta_attr < 1.0, "theta_attr", "must lie in (0,1)");
  require(theta_rule > 0.0 && theta_rule < 1.0, "theta_rule", "must lie in (0,1)");
  require(growth_threshold >= 0.0, "growth_threshold", "must be non-negative");
  require(patience >= 1, "patience", "must be at least 1");
  require(max_rules >= 1, "max_rules", "must be at least 1");
  require(initial_rules >= 1, "initial_rules", "must be at least 1");
  require(max_rules >= starting_rules(), "max_rules", "must be at least the initial rule count");
  require(prune_attr_freq >= 1, "prune_attr_freq", "must be at least 1");
  require(prune_rule_freq >= 1, "prune_rule_freq", "must be at least 1");
  require(persistence_checks >= 1, "persistence_checks", "must be at least 1");
  require(l1_attr >= 0.0, "l1_attr", "must be non-negative");
  require(l1_rule >= 0.0, "l1_rule", "must be non-negative");
  require(rollback_tolerance >= 0.0, "rollback_tolerance", "must be non-negative");
  require(attr_logit_init_std >= 0.0, "attr_logit_init_std", "must be non-negative");
  require(consequent_init_std >= 0.0, "consequent_init_std", "must be non-negative");
  require(width_floor > 0.0, "width_floor", "must be positive");
  require(epsilon > 0.0, "epsilon", "must be positive");
}

std::size_t TrainConfig::effective_grow_topk() const {
  return grow_topk > 0 ? grow_topk : std::max<std::size_t>(8, batch_size / 64);
}

std::size_t TrainConfig::starting_rules() const {
  return rgrp_enabled ? std::min(initial_rules, max_rules) : max_rules;
}

#define ADAR_CONFIG_FIELDS(X)                                                                       \
  X(learning_rate) X(batch_size) X(epochs) X(theta_attr) X(theta_rule) X(growth_threshold)         \
  X(patience) X(max_rules) X(initial_rules) X(prune_attr_freq) X(prune_rule_freq)                   \
  X(persistence_checks) X(l1_attr) X(l1_rule) X(rollback_tolerance) X(grow_topk) X(ap_enabled)     \
  X(rgrp_enabled) X(rule_logit_init) X(attr_logit_init_std) X(consequent_init_std) X(use_bias)      \
  X(strict_mask_product) X(alpha_in_exponent) X(width_floor) X(epsilon) X(seed)

void to_json(nlohmann::json& j, const TrainConfig& cfg) {
  j = nlohmann::json::object();
#define ADAR_WRITE(name) j[#name] = cfg.name;
  ADAR_CONFIG_FIELDS(ADAR_WRITE)
#undef ADAR_WRITE
}

void from_json(const nlohmann::json& j, TrainConfig& cfg) {
  if (!j.is_object()) throw ConfigError("train config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    bool known = false;
#define ADAR_READ(name)                                                              \
  if (key == #name) {                                                                \
    try {                                                                            \
      value.get_to(cfg.name);                                                        \
    } catch (const nlohmann::json::exception&) {                                     \
      throw ConfigError(std::string("config field ") + #name + " has the wrong type"); \
    }                                                                                \
    known = true;                                                                    \
  }
    ADAR_CONFIG_FIELDS(ADAR_READ)
#undef ADAR_READ
    if (!known) throw ConfigError("unknown config field: " + key);
  }
}

}  // namespace adar
