#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "adar/config.hpp"
#include "adar/matrix.hpp"
#include "adar/rule_base.hpp"

namespace adar {

enum class EventKind { prune_attr, prune_rule, grow, rollback };

std::string_view to_string(EventKind kind);
EventKind event_kind_from_string(std::string_view name);

/// One structural edit. Indices refer to the rule base as it was when the
/// event fired, so replaying the log in order is well defined.
struct StructuralEvent {
  std::size_t epoch = 0;
  std::size_t sequence = 0;
  EventKind kind = EventKind::grow;
  std::optional<std::size_t> rule_index;
  std::optional<std::size_t> attr_index;
  /// alpha (prune_attr), beta (prune_rule) or mean |residual| of the seed samples (grow).
  std::optional<double> weight;
  std::optional<double> val_rmse_before;
  std::optional<double> val_rmse_after;
  /// rollback only: number of immediately preceding events that were reverted.
  std::size_t undone = 0;

  bool operator==(const StructuralEvent&) const = default;
};

nlohmann::json to_json(const StructuralEvent& e);
StructuralEvent structural_event_from_json(const nlohmann::json& j);

/// Consecutive below-threshold check counts, shaped like the rule base.
struct StreakCounters {
  std::size_t num_attrs = 0;
  std::vector<std::size_t> attr;  // L*D
  std::vector<std::size_t> rule;  // L

  StreakCounters() = default;
  StreakCounters(std::size_t num_rules, std::size_t num_attrs);
  void add_rule();
  void remove_rule(std::size_t l);
  /// Re-inserts a removed rule's counters at index l.
  void insert_rule(std::size_t l, std::size_t rule_streak, std::span<const std::size_t> attr_streaks);

  bool operator==(const StreakCounters&) const = default;
};

struct EditResult {
  RuleBase rule_base;
  std::vector<StructuralEvent> events;
};

/// Attribute pruning. Updates the streak of every active (l, i) and masks those
/// whose alpha stayed below theta for `persistence` checks. The last active
/// attribute of a rule is never masked here.
EditResult prune_attributes(const RuleBase& rb, StreakCounters& streaks, double theta, std::size_t persistence);

/// Rule pruning on beta. Rules are deleted highest index first; if every rule
/// qualifies, the one with the largest beta survives.
EditResult prune_rules(const RuleBase& rb, StreakCounters& streaks, double theta, std::size_t persistence);

/// Indices of the k largest |residual| values; ties go to the lower index.
std::vector<std::size_t> top_residual_rows(std::span<const double> residuals, std::size_t k);

/// Adds a rule seeded from the k worst-fit rows of X. Throws CapacityError
/// when the rule base already holds max_rules rules.
EditResult grow_rule(const RuleBase& rb, const Matrix& X, std::span<const double> residuals, std::size_t k,
                     std::size_t max_rules, std::mt19937_64& rng, const TrainConfig& cfg);

/// Masks (one row per rule) obtained by replaying a log against initial masks.
struct StructureSkeleton {
  std::size_t num_attrs = 0;
  std::vector<std::vector<std::uint8_t>> masks;

  static StructureSkeleton of(const RuleBase& rb);
  std::size_t num_rules() const { return masks.size(); }
  bool operator==(const StructureSkeleton&) const = default;
};

StructureSkeleton replay(StructureSkeleton initial, std::span<const StructuralEvent> events);

}  // namespace adar
