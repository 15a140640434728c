#include "adar/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>

#include "adar/error.hpp"
#include "adar/init.hpp"
#include "adar/metrics.hpp"
#include "adar/random.hpp"

namespace adar {

Gradients Gradients::zeros_like(const RuleBase& rb) {
  const auto L = rb.num_rules();
  const auto D = rb.num_attrs();
  return {Matrix(L, D), Matrix(L, D), Matrix(L, D), std::vector<double>(L, 0.0), Matrix(L, D),
          std::vector<double>(L, 0.0)};
}

std::array<std::span<double>, 6> param_blocks(RuleBase& rb) {
  return {rb.centers.data(), rb.widths.data(), rb.attr_logits.data(), rb.rule_logits, rb.consequents.data(),
          rb.bias};
}

std::array<std::span<double>, 6> param_blocks(Gradients& g) {
  return {g.centers.data(), g.widths.data(), g.attr_logits.data(), g.rule_logits, g.consequents.data(), g.bias};
}

std::array<std::span<const double>, 6> param_blocks(const Gradients& g) {
  return {g.centers.data(), g.widths.data(), g.attr_logits.data(), g.rule_logits, g.consequents.data(), g.bias};
}

namespace {

void check_batch(const RuleBase& rb, const Matrix& X, std::span<const double> y) {
  if (X.rows() == 0) throw ShapeError("empty batch");
  if (X.rows() != y.size()) throw ShapeError("feature rows and targets differ in length");
  if (X.cols() != rb.num_attrs()) throw ShapeError("batch attribute count does not match rule base");
}

double penalty(const RuleBase& rb, double l1_attr, double l1_rule) {
  double p = 0.0;
  if (l1_attr != 0.0) {
    const auto alpha = compute_attribute_weights(rb);
    p += l1_attr * std::accumulate(alpha.data().begin(), alpha.data().end(), 0.0);
  }
  if (l1_rule != 0.0) {
    const auto beta = compute_rule_weights(rb);
    p += l1_rule * std::accumulate(beta.begin(), beta.end(), 0.0);
  }
  return p;
}

}  // namespace

double loss(const RuleBase& rb, const Matrix& X, std::span<const double> y, double l1_attr, double l1_rule) {
  check_batch(rb, X, y);
  const auto pred = predict_batch(rb, X);
  double sse = 0.0;
  for (std::size_t n = 0; n < pred.size(); ++n) sse += (pred[n] - y[n]) * (pred[n] - y[n]);
  return sse / static_cast<double>(pred.size()) + penalty(rb, l1_attr, l1_rule);
}

Gradients gradients(const RuleBase& rb, const Matrix& X, std::span<const double> y, double l1_attr,
                    double l1_rule) {
  check_batch(rb, X, y);
  const auto L = rb.num_rules();
  const auto D = rb.num_attrs();
  const auto N = X.rows();
  const auto alpha = compute_attribute_weights(rb);
  const auto beta = compute_rule_weights(rb);

  Gradients g = Gradients::zeros_like(rb);
  std::vector<double> wf(L), out(L);
  for (std::size_t n = 0; n < N; ++n) {
    const auto x = X.row(n);
    double total = 0.0;
    for (std::size_t l = 0; l < L; ++l) {
      double f = 1.0;
      std::size_t used = 0;
      double yl = rb.use_bias ? rb.bias[l] : 0.0;
      for (std::size_t i = 0; i < D; ++i) {
        if (rb.active(l, i)) {
          const double m = membership(x[i], rb.centers(l, i), rb.widths(l, i));
          f *= rb.alpha_in_exponent ? std::pow(m, alpha(l, i)) : m * alpha(l, i);
          yl += rb.consequents(l, i) * x[i];
          ++used;
        } else if (rb.strict_mask_product) {
          f = 0.0;
        }
      }
      wf[l] = (used == 0 ? 0.0 : f) * beta[l];
      out[l] = yl;
      total += wf[l];
    }
    const double norm = total + rb.epsilon;
    double pred = 0.0;
    for (std::size_t l = 0; l < L; ++l) pred += (wf[l] / norm) * out[l];

    const double e = 2.0 * (pred - y[n]) / static_cast<double>(N);
    for (std::size_t l = 0; l < L; ++l) {
      const double w = wf[l] / norm;
      // d loss / d log f~_l
      const double G = e * (out[l] - pred) / norm * wf[l];
      g.rule_logits[l] += G * (1.0 - beta[l]);
      if (rb.use_bias) g.bias[l] += e * w;
      for (std::size_t i = 0; i < D; ++i) {
        if (!rb.active(l, i)) continue;
        const double s = rb.widths(l, i);
        const double dx = x[i] - rb.centers(l, i);
        const double a = alpha(l, i);
        // With alpha in the exponent, log f_l carries -alpha u^2 / 2 per attribute.
        const double k = rb.alpha_in_exponent ? a : 1.0;
        g.centers(l, i) += G * k * dx / (s * s);
        g.widths(l, i) += G * k * dx * dx / (s * s * s);
        g.attr_logits(l, i) += rb.alpha_in_exponent ? G * (-0.5 * dx * dx / (s * s)) * a * (1.0 - a)
                                                    : G * (1.0 - a);
        g.consequents(l, i) += e * w * x[i];
      }
    }
  }

  for (std::size_t l = 0; l < L; ++l) {
    g.rule_logits[l] += l1_rule * beta[l] * (1.0 - beta[l]);
    for (std::size_t i = 0; i < D; ++i) {
      if (rb.active(l, i)) g.attr_logits(l, i) += l1_attr * alpha(l, i) * (1.0 - alpha(l, i));
    }
  }

  const auto blocks = param_blocks(std::as_const(g));
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    for (double v : blocks[b]) {
      if (!std::isfinite(v)) throw NumericError("non-finite gradient in parameter block " + std::string(kParamBlockNames[b]));
    }
  }
  return g;
}

Gradients finite_diff_gradients(const RuleBase& rb, const Matrix& X, std::span<const double> y, double l1_attr,
                                double l1_rule, double h) {
  if (!(h > 0.0)) throw ConfigError("finite difference step must be positive");
  RuleBase probe = rb;
  Gradients g = Gradients::zeros_like(rb);
  auto params = param_blocks(probe);
  auto out = param_blocks(g);
  for (std::size_t b = 0; b < params.size(); ++b) {
    if (kParamBlockNames[b] == "c0" && !rb.use_bias) continue;
    for (std::size_t k = 0; k < params[b].size(); ++k) {
      const double saved = params[b][k];
      params[b][k] = saved + h;
      const double up = loss(probe, X, y, l1_attr, l1_rule);
      params[b][k] = saved - h;
      const double down = loss(probe, X, y, l1_attr, l1_rule);
      params[b][k] = saved;
      out[b][k] = (up - down) / (2.0 * h);
    }
  }
  return g;
}

AdamState::AdamState(const RuleBase& rb) : first(Gradients::zeros_like(rb)), second(Gradients::zeros_like(rb)) {}

bool AdamState::matches(const RuleBase& rb) const {
  const auto L = rb.num_rules();
  const auto D = rb.num_attrs();
  auto shaped = [&](const Gradients& g) {
    auto same = [&](const Matrix& m) { return m.rows() == L && m.cols() == D; };
    return same(g.centers) && same(g.widths) && same(g.attr_logits) && same(g.consequents) &&
           g.rule_logits.size() == L && g.bias.size() == L;
  };
  return shaped(first) && shaped(second);
}

void adam_step(AdamState& state, RuleBase& rb, const Gradients& g, double lr) {
  if (!state.matches(rb)) throw ShapeError("optimizer state does not match rule base; reinitialize it");
  auto params = param_blocks(rb);
  const auto grads = param_blocks(g);
  auto m = param_blocks(state.first);
  auto v = param_blocks(state.second);
  for (std::size_t b = 0; b < params.size(); ++b) {
    if (grads[b].size() != params[b].size()) throw ShapeError("gradient does not match rule base shape");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t b = 0; b < params.size(); ++b) {
    for (std::size_t k = 0; k < params[b].size(); ++k) {
      const double gk = grads[b][k];
      m[b][k] = state.beta1 * m[b][k] + (1.0 - state.beta1) * gk;
      v[b][k] = state.beta2 * v[b][k] + (1.0 - state.beta2) * gk * gk;
      const double mhat = m[b][k] / c1;
      const double vhat = v[b][k] / c2;
      params[b][k] -= lr * mhat / (std::sqrt(vhat) + state.stabilizer);
    }
  }
  rb.clamp_widths();
}

namespace {

bool needs_restore(double before, double after, double tolerance) { return after > before * (1.0 + tolerance); }

}  // namespace

RollbackDecision evaluate_rollback(const RuleBase& prev, const RuleBase& curr, const Matrix& X_val,
                                   std::span<const double> y_val, double tolerance) {
  const double before = rmse(predict_batch(prev, X_val), y_val);
  const double after = rmse(predict_batch(curr, X_val), y_val);
  return needs_restore(before, after, tolerance) ? RollbackDecision::restore : RollbackDecision::keep;
}

std::size_t FitLog::count(EventKind kind) const {
  return static_cast<std::size_t>(std::ranges::count_if(events, [&](const auto& e) { return e.kind == kind; }));
}

void FitLog::write_jsonl(std::ostream& os) const {
  std::size_t next_event = 0;
  for (const auto& rec : epochs) {
    while (next_event < events.size() && events[next_event].epoch <= rec.epoch) {
      os << to_json(events[next_event++]).dump() << '\n';
    }
    nlohmann::json j = {{"epoch", rec.epoch},         {"train_loss", rec.train_loss},
                        {"val_rmse", rec.val_rmse},   {"best_val_rmse", rec.best_val_rmse},
                        {"L", rec.rules},             {"active_attr_total", rec.active_attrs}};
    os << j.dump() << '\n';
  }
  while (next_event < events.size()) os << to_json(events[next_event++]).dump() << '\n';
}

namespace {

class Trainer {
 public:
  Trainer(const TrainValSplit& data, const TrainConfig& cfg)
      : data_(data),
        cfg_(cfg),
        shuffle_rng_(derive_seed({cfg.seed, 0x5348})),
        grow_rng_(derive_seed({cfg.seed, 0x4752})) {}

  FitResult run() {
    const auto D = data_.X_train.cols();
    rb_ = init_rulebase(data_.X_train, cfg_.starting_rules(), derive_seed({cfg_.seed, 0x494e}), cfg_);
    adam_ = AdamState(rb_);
    streaks_ = StreakCounters(rb_.num_rules(), D);

    FitResult result;
    result.log.initial = rb_;
    double val = val_rmse(rb_);
    result.model = rb_;
    result.best_val_rmse = val;
    double growth_ref = val;
    std::size_t stall = 0;

    std::vector<std::size_t> order(data_.X_train.rows());
    std::iota(order.begin(), order.end(), std::size_t{0});

    for (std::size_t epoch = 1; epoch <= cfg_.epochs; ++epoch) {
      epoch_ = epoch;
      train_epoch(order);
      val = val_rmse(rb_);

      if (cfg_.ap_enabled && epoch % cfg_.prune_attr_freq == 0) {
        auto saved = streaks_;
        auto edit = prune_attributes(rb_, streaks_, cfg_.theta_attr, cfg_.persistence_checks);
        commit_prune(edit, saved, val, result.log);
      }
      if (cfg_.rgrp_enabled && epoch % cfg_.prune_rule_freq == 0) {
        auto saved = streaks_;
        auto edit = prune_rules(rb_, streaks_, cfg_.theta_rule, cfg_.persistence_checks);
        commit_prune(edit, saved, val, result.log);
      }
      if (cfg_.rgrp_enabled) {
        if (growth_ref - val > cfg_.growth_threshold) {
          growth_ref = val;
          stall = 0;
        } else {
          ++stall;
        }
        if (stall >= cfg_.patience && rb_.num_rules() < cfg_.max_rules) {
          grow(val, result.log);
          stall = 0;
        }
      }

      if (val < result.best_val_rmse) {
        result.best_val_rmse = val;
        result.model = rb_;
        result.best_epoch = epoch;
      }
      const double train_loss = loss(rb_, data_.X_train, data_.y_train, cfg_.l1_attr, cfg_.l1_rule);
      if (!std::isfinite(train_loss)) {
        throw NumericError("training loss became non-finite at epoch " + std::to_string(epoch));
      }
      result.log.epochs.push_back(
          {epoch, train_loss, val, result.best_val_rmse, rb_.num_rules(), rb_.active_total()});
    }
    result.log.final_state = rb_;
    return result;
  }

 private:
  double val_rmse(const RuleBase& rb) const { return rmse(predict_batch(rb, data_.X_val), data_.y_val); }

  void train_epoch(std::vector<std::size_t>& order) {
    std::ranges::shuffle(order, shuffle_rng_);
    const auto n = order.size();
    for (std::size_t start = 0; start < n; start += cfg_.batch_size) {
      const auto stop = std::min(n, start + cfg_.batch_size);
      std::span<const std::size_t> idx(order.data() + start, stop - start);
      const Matrix Xb = data_.X_train.select_rows(idx);
      std::vector<double> yb(idx.size());
      for (std::size_t k = 0; k < idx.size(); ++k) yb[k] = data_.y_train[idx[k]];
      const auto g = gradients(rb_, Xb, yb, cfg_.l1_attr, cfg_.l1_rule);
      adam_step(adam_, rb_, g, cfg_.learning_rate);
    }
  }

  void push(FitLog& log, StructuralEvent e) {
    e.epoch = epoch_;
    e.sequence = sequence_++;
    log.events.push_back(e);
  }

  // Applies the planned prunes one at a time. Each edit is kept or restored on
  // its own validation RMSE; a restored edit gets its pre-check streak back.
  void commit_prune(const EditResult& plan, const StreakCounters& saved, double& val, FitLog& log) {
    if (plan.events.empty()) return;
    const auto D = rb_.num_attrs();
    for (auto e : plan.events) {
      RuleBase candidate = rb_;
      const auto l = *e.rule_index;
      if (e.kind == EventKind::prune_attr) {
        candidate.set_active(l, *e.attr_index, false);
      } else {
        candidate.remove_rule(l);
      }
      const double after = val_rmse(candidate);
      e.val_rmse_before = val;
      e.val_rmse_after = after;
      push(log, e);
      if (needs_restore(val, after, cfg_.rollback_tolerance)) {
        if (e.kind == EventKind::prune_attr) {
          streaks_.attr[l * D + *e.attr_index] = saved.attr[l * D + *e.attr_index];
        } else {
          streaks_.insert_rule(l, saved.rule[l],
                               std::span(saved.attr).subspan(l * D, D));
        }
        StructuralEvent undo;
        undo.kind = EventKind::rollback;
        undo.undone = 1;
        undo.val_rmse_before = after;
        undo.val_rmse_after = val;
        push(log, undo);
      } else {
        rb_ = std::move(candidate);
        val = after;
      }
    }
    adam_ = AdamState(rb_);
  }

  void grow(double& val, FitLog& log) {
    const auto pred = predict_batch(rb_, data_.X_train);
    std::vector<double> residuals(pred.size());
    for (std::size_t n = 0; n < pred.size(); ++n) residuals[n] = data_.y_train[n] - pred[n];
    auto edit = grow_rule(rb_, data_.X_train, residuals, cfg_.effective_grow_topk(), cfg_.max_rules, grow_rng_, cfg_);
    const double after = val_rmse(edit.rule_base);
    for (auto& e : edit.events) {
      e.val_rmse_before = val;
      e.val_rmse_after = after;
      push(log, e);
    }
    rb_ = std::move(edit.rule_base);
    streaks_.add_rule();
    adam_ = AdamState(rb_);
    val = after;
  }

 private:
  const TrainValSplit& data_;
  const TrainConfig& cfg_;
  std::mt19937_64 shuffle_rng_;
  std::mt19937_64 grow_rng_;
  RuleBase rb_;
  AdamState adam_;
  StreakCounters streaks_;
  std::size_t epoch_ = 0;
  std::size_t sequence_ = 0;
};

}  // namespace

FitResult fit(const TrainValSplit& data, const TrainConfig& cfg) {
  cfg.validate();
  if (data.X_train.rows() != data.y_train.size() || data.X_val.rows() != data.y_val.size()) {
    throw ShapeError("fit: feature rows and targets differ in length");
  }
  if (data.X_val.rows() == 0) throw ConfigError("fit: validation split is empty");
  if (data.X_train.cols() != data.X_val.cols()) throw ShapeError("fit: train and validation widths differ");
  Trainer trainer(data, cfg);
  return trainer.run();
}

}  // namespace adar
