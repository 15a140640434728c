#include "adar/structure.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "adar/error.hpp"
#include "adar/init.hpp"

namespace adar {

std::string_view to_string(EventKind kind) {
  switch (kind) {
    case EventKind::prune_attr: return "prune_attr";
    case EventKind::prune_rule: return "prune_rule";
    case EventKind::grow: return "grow";
    case EventKind::rollback: return "rollback";
  }
  return "unknown";
}

EventKind event_kind_from_string(std::string_view name) {
  for (auto k : {EventKind::prune_attr, EventKind::prune_rule, EventKind::grow, EventKind::rollback}) {
    if (to_string(k) == name) return k;
  }
  throw SchemaError("unknown structural event kind: " + std::string(name));
}

nlohmann::json to_json(const StructuralEvent& e) {
  nlohmann::json details = nlohmann::json::object();
  if (e.rule_index) details["rule_index"] = *e.rule_index;
  if (e.attr_index) details["attr_index"] = *e.attr_index;
  if (e.weight) details["weight"] = *e.weight;
  if (e.val_rmse_before) details["val_rmse_before"] = *e.val_rmse_before;
  if (e.val_rmse_after) details["val_rmse_after"] = *e.val_rmse_after;
  if (e.kind == EventKind::rollback) details["undone"] = e.undone;
  return {{"epoch", e.epoch}, {"seq", e.sequence}, {"kind", to_string(e.kind)}, {"details", details}};
}

StructuralEvent structural_event_from_json(const nlohmann::json& j) {
  StructuralEvent e;
  e.epoch = j.at("epoch").get<std::size_t>();
  e.sequence = j.at("seq").get<std::size_t>();
  e.kind = event_kind_from_string(j.at("kind").get<std::string>());
  const auto& d = j.at("details");
  if (d.contains("rule_index")) e.rule_index = d["rule_index"].get<std::size_t>();
  if (d.contains("attr_index")) e.attr_index = d["attr_index"].get<std::size_t>();
  if (d.contains("weight")) e.weight = d["weight"].get<double>();
  if (d.contains("val_rmse_before")) e.val_rmse_before = d["val_rmse_before"].get<double>();
  if (d.contains("val_rmse_after")) e.val_rmse_after = d["val_rmse_after"].get<double>();
  if (d.contains("undone")) e.undone = d["undone"].get<std::size_t>();
  return e;
}

StreakCounters::StreakCounters(std::size_t num_rules, std::size_t attrs)
    : num_attrs(attrs), attr(num_rules * attrs, 0), rule(num_rules, 0) {}

void StreakCounters::add_rule() {
  attr.insert(attr.end(), num_attrs, 0);
  rule.push_back(0);
}

void StreakCounters::remove_rule(std::size_t l) {
  auto first = attr.begin() + static_cast<std::ptrdiff_t>(l * num_attrs);
  attr.erase(first, first + static_cast<std::ptrdiff_t>(num_attrs));
  rule.erase(rule.begin() + static_cast<std::ptrdiff_t>(l));
}

void StreakCounters::insert_rule(std::size_t l, std::size_t rule_streak, std::span<const std::size_t> attr_streaks) {
  if (l > rule.size() || attr_streaks.size() != num_attrs) throw ShapeError("insert_rule: bad index or row length");
  attr.insert(attr.begin() + static_cast<std::ptrdiff_t>(l * num_attrs), attr_streaks.begin(), attr_streaks.end());
  rule.insert(rule.begin() + static_cast<std::ptrdiff_t>(l), rule_streak);
}

namespace {

void check_streaks(const RuleBase& rb, const StreakCounters& streaks) {
  if (streaks.num_attrs != rb.num_attrs() || streaks.rule.size() != rb.num_rules() ||
      streaks.attr.size() != rb.num_rules() * rb.num_attrs()) {
    throw ShapeError("streak counters do not match the rule base shape");
  }
}

}  // namespace

EditResult prune_attributes(const RuleBase& rb, StreakCounters& streaks, double theta, std::size_t persistence) {
  check_streaks(rb, streaks);
  EditResult out{rb, {}};
  auto& next = out.rule_base;
  const auto alpha = compute_attribute_weights(rb);
  const auto D = rb.num_attrs();

  for (std::size_t l = 0; l < rb.num_rules(); ++l) {
    std::vector<std::size_t> due;
    std::size_t active = 0;
    for (std::size_t i = 0; i < D; ++i) {
      auto& streak = streaks.attr[l * D + i];
      if (!rb.active(l, i)) {
        streak = 0;
        continue;
      }
      ++active;
      streak = alpha(l, i) < theta ? streak + 1 : 0;
      if (streak >= persistence) due.push_back(i);
    }
    if (due.empty()) continue;
    if (due.size() == active) {
      // keep the strongest attribute so the rule keeps an antecedent
      auto keep = std::ranges::max_element(due, [&](auto a, auto b) { return alpha(l, a) < alpha(l, b); });
      due.erase(keep);
    }
    for (auto i : due) {
      next.set_active(l, i, false);
      streaks.attr[l * D + i] = 0;
      StructuralEvent e;
      e.kind = EventKind::prune_attr;
      e.rule_index = l;
      e.attr_index = i;
      e.weight = alpha(l, i);
      out.events.push_back(e);
    }
  }
  return out;
}

EditResult prune_rules(const RuleBase& rb, StreakCounters& streaks, double theta, std::size_t persistence) {
  check_streaks(rb, streaks);
  if (rb.num_rules() == 0) throw ConfigError("prune_rules: empty rule base");
  EditResult out{rb, {}};
  const auto beta = compute_rule_weights(rb);

  std::vector<std::size_t> due;
  for (std::size_t l = 0; l < rb.num_rules(); ++l) {
    streaks.rule[l] = beta[l] < theta ? streaks.rule[l] + 1 : 0;
    if (streaks.rule[l] >= persistence) due.push_back(l);
  }
  if (due.size() == rb.num_rules()) {
    auto keep = std::ranges::max_element(due, [&](auto a, auto b) { return beta[a] < beta[b]; });
    due.erase(keep);
  }
  for (auto it = due.rbegin(); it != due.rend(); ++it) {
    out.rule_base.remove_rule(*it);
    streaks.remove_rule(*it);
    StructuralEvent e;
    e.kind = EventKind::prune_rule;
    e.rule_index = *it;
    e.weight = beta[*it];
    out.events.push_back(e);
  }
  return out;
}

std::vector<std::size_t> top_residual_rows(std::span<const double> residuals, std::size_t k) {
  std::vector<std::size_t> order(residuals.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::ranges::stable_sort(order, [&](auto a, auto b) { return std::abs(residuals[a]) > std::abs(residuals[b]); });
  order.resize(std::min(k, order.size()));
  return order;
}

EditResult grow_rule(const RuleBase& rb, const Matrix& X, std::span<const double> residuals, std::size_t k,
                     std::size_t max_rules, std::mt19937_64& rng, const TrainConfig& cfg) {
  if (rb.num_rules() >= max_rules) {
    throw CapacityError("grow_rule: rule base already has " + std::to_string(rb.num_rules()) + " rules");
  }
  if (residuals.size() != X.rows()) throw ShapeError("grow_rule: residuals not aligned with rows");
  if (X.cols() != rb.num_attrs()) throw ShapeError("grow_rule: attribute count mismatch");
  if (k == 0 || X.rows() == 0) throw ConfigError("grow_rule: need at least one seed sample");

  const auto rows = top_residual_rows(residuals, k);
  const auto center = column_mean(X, rows);
  const auto width = column_std(X, rows, rb.width_floor);
  std::vector<double> attr(rb.num_attrs()), cons(rb.num_attrs());
  sample_rule_parameters(rng, cfg, attr, cons);

  EditResult out{rb, {}};
  out.rule_base.append_rule(center, width, attr, cfg.rule_logit_init, cons);

  double mean_abs = 0.0;
  for (auto r : rows) mean_abs += std::abs(residuals[r]);
  StructuralEvent e;
  e.kind = EventKind::grow;
  e.rule_index = rb.num_rules();
  e.weight = mean_abs / static_cast<double>(rows.size());
  out.events.push_back(e);
  return out;
}

StructureSkeleton StructureSkeleton::of(const RuleBase& rb) {
  StructureSkeleton s;
  s.num_attrs = rb.num_attrs();
  for (std::size_t l = 0; l < rb.num_rules(); ++l) {
    std::vector<std::uint8_t> row(rb.num_attrs());
    for (std::size_t i = 0; i < rb.num_attrs(); ++i) row[i] = rb.active(l, i) ? 1 : 0;
    s.masks.push_back(std::move(row));
  }
  return s;
}

StructureSkeleton replay(StructureSkeleton initial, std::span<const StructuralEvent> events) {
  std::vector<StructureSkeleton> states{std::move(initial)};
  for (const auto& e : events) {
    if (e.kind == EventKind::rollback) {
      if (e.undone >= states.size()) throw SchemaError("replay: rollback reverts more events than exist");
      states.push_back(states[states.size() - 1 - e.undone]);
      continue;
    }
    auto s = states.back();
    const auto l = e.rule_index.value_or(0);
    switch (e.kind) {
      case EventKind::prune_attr:
        if (l >= s.num_rules() || !e.attr_index || *e.attr_index >= s.num_attrs) {
          throw SchemaError("replay: prune_attr index out of range");
        }
        s.masks[l][*e.attr_index] = 0;
        break;
      case EventKind::prune_rule:
        if (l >= s.num_rules()) throw SchemaError("replay: prune_rule index out of range");
        s.masks.erase(s.masks.begin() + static_cast<std::ptrdiff_t>(l));
        break;
      case EventKind::grow:
        s.masks.emplace_back(s.num_attrs, std::uint8_t{1});
        break;
      case EventKind::rollback:
        break;
    }
    states.push_back(std::move(s));
  }
  return states.back();
}

}  // namespace adar
