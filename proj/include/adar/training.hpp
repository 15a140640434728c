#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include "adar/config.hpp"
#include "adar/matrix.hpp"
#include "adar/rule_base.hpp"
#include "adar/structure.hpp"

namespace adar {

/// Partial derivatives of the loss, shaped like the learnable blocks of a RuleBase.
struct Gradients {
  Matrix centers;
  Matrix widths;
  Matrix attr_logits;
  std::vector<double> rule_logits;
  Matrix consequents;
  std::vector<double> bias;

  static Gradients zeros_like(const RuleBase& rb);
};

inline constexpr std::array<std::string_view, 6> kParamBlockNames = {"v", "s", "w_a", "w_r", "c", "c0"};

/// The six learnable blocks in kParamBlockNames order, as flat spans.
std::array<std::span<double>, 6> param_blocks(RuleBase& rb);
std::array<std::span<double>, 6> param_blocks(Gradients& g);
std::array<std::span<const double>, 6> param_blocks(const Gradients& g);

/// Batch MSE plus l1_attr * sum(alpha) + l1_rule * sum(beta). Throws on an empty batch.
double loss(const RuleBase& rb, const Matrix& X, std::span<const double> y, double l1_attr, double l1_rule);

/// Exact reverse-mode gradient of loss(). Masked (rule, attribute) entries are
/// exactly zero in v, s, w_a and c. Throws NumericError naming the first
/// block holding a non-finite entry.
Gradients gradients(const RuleBase& rb, const Matrix& X, std::span<const double> y, double l1_attr,
                    double l1_rule);

/// Central differences of loss() with step h, one scalar parameter at a time.
Gradients finite_diff_gradients(const RuleBase& rb, const Matrix& X, std::span<const double> y, double l1_attr,
                                double l1_rule, double h);

/// Adam moments for one rule-base structure. Recreate after any structural edit.
struct AdamState {
  Gradients first;
  Gradients second;
  std::size_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double stabilizer = 1e-8;

  AdamState() = default;
  explicit AdamState(const RuleBase& rb);
  bool matches(const RuleBase& rb) const;
};

/// One Adam update followed by re-flooring the widths. Throws ShapeError when
/// the state was built for a different structure.
void adam_step(AdamState& state, RuleBase& rb, const Gradients& g, double lr);

enum class RollbackDecision { keep, restore };

/// restore when RMSE(curr) > RMSE(prev) * (1 + tolerance) on the validation rows.
RollbackDecision evaluate_rollback(const RuleBase& prev, const RuleBase& curr, const Matrix& X_val,
                                   std::span<const double> y_val, double tolerance);

struct TrainValSplit {
  Matrix X_train;
  std::vector<double> y_train;
  Matrix X_val;
  std::vector<double> y_val;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_rmse = 0.0;
  double best_val_rmse = 0.0;
  std::size_t rules = 0;
  std::size_t active_attrs = 0;
};

/// Everything fit() did, in order. `initial` and `final_state` bracket the
/// structural events so the log can be replayed.
struct FitLog {
  RuleBase initial;
  RuleBase final_state;
  std::vector<EpochRecord> epochs;
  std::vector<StructuralEvent> events;

  std::size_t count(EventKind kind) const;
  /// JSONL: epoch records and structural events interleaved in time order.
  void write_jsonl(std::ostream& os) const;
};

struct FitResult {
  RuleBase model;  // best-validation snapshot
  double best_val_rmse = 0.0;
  std::size_t best_epoch = 0;
  FitLog log;
};

/// Mini-batch Adam training with scheduled attribute pruning, rule pruning and
/// rule growth. All randomness derives from cfg.seed.
FitResult fit(const TrainValSplit& data, const TrainConfig& cfg);

}  // namespace adar
