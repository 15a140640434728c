#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "adar/data.hpp"
#include "adar/error.hpp"
#include "adar/metrics.hpp"
#include "adar/training.hpp"
#include "gradcheck.hpp"
#include "helpers.hpp"

using namespace adar;

namespace {

// A single rule over one attribute whose output equals c * x exactly.
RuleBase linear_rule(double c) {
  RuleBase rb(1, 1);
  rb.consequents(0, 0) = c;
  return rb;
}

TrainValSplit small_split(std::uint64_t seed, std::size_t n = 300, std::size_t d = 2) {
  auto ds = synthesize(SynthKind::piecewise_linear, n, d, 0.05, seed);
  return ds.train_val();
}

}  // namespace

TEST_CASE("loss examples") {
  const Matrix X(2, 1, 1.0);
  SUBCASE("perfect predictions") {
    auto rb = linear_rule(2.0);
    const std::vector<double> y{predict(rb, X.row(0)), predict(rb, X.row(1))};
    CHECK(loss(rb, X, y, 0.0, 0.0) == 0.0);
  }
  SUBCASE("residuals of plus and minus one give MSE one") {
    auto rb = linear_rule(0.0);
    const std::vector<double> y{1.0, -1.0};
    CHECK(loss(rb, X, y, 0.0, 0.0) == doctest::Approx(1.0));
  }
  SUBCASE("L1 penalties add the activated weights") {
    auto rb = linear_rule(0.0);
    const std::vector<double> y{0.0, 0.0};
    const double beta = compute_rule_weights(rb)[0];
    CHECK(loss(rb, X, y, 1.0, 0.0) == doctest::Approx(0.5));
    CHECK(loss(rb, X, y, 1.0, 0.3) == doctest::Approx(0.5 + 0.3 * beta));
  }
  SUBCASE("empty batch is rejected") {
    auto rb = linear_rule(1.0);
    CHECK_THROWS_AS(loss(rb, Matrix(0, 1), std::vector<double>{}, 0.0, 0.0), ShapeError);
  }
}

TEST_CASE("gradients vanish at an interpolating model without L1") {
  std::mt19937_64 rng(3);
  const auto rb = testing::random_rule_base(rng, 3, 2);
  const auto X = testing::random_matrix(rng, 6, 2);
  const auto y = predict_batch(rb, X);
  const auto g = gradients(rb, X, y, 0.0, 0.0);
  for (const auto& block : param_blocks(g)) {
    for (double v : block) CHECK(v == 0.0);
  }
}

TEST_CASE("gradients match central differences on the small seeded instance") {
  for (bool exponent : {false, true}) {
    CAPTURE(exponent);
    std::mt19937_64 rng(7);
    auto rb = testing::random_rule_base(rng, 2, 2);
    rb.alpha_in_exponent = exponent;
    const auto X = testing::random_matrix(rng, 4, 2);
    const auto y = testing::random_vector(rng, 4);
    const auto check = testing::compare_gradients(gradients(rb, X, y, 1e-4, 1e-4),
                                                  finite_diff_gradients(rb, X, y, 1e-4, 1e-4, 1e-5));
    CHECK(check.worst() <= 1e-4);
  }
}

TEST_CASE("gradients match central differences on random instances, with and without bias") {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const auto inst = testing::random_instance(seed, 8, seed % 2 == 1, seed % 4 < 2);
    CAPTURE(seed);
    const auto check = testing::compare_gradients(gradients(inst.rb, inst.X, inst.y, 1e-2, 1e-2),
                                                  finite_diff_gradients(inst.rb, inst.X, inst.y, 1e-2, 1e-2, 1e-5));
    CHECK(check.worst() <= 1e-4);
  }
}

TEST_CASE("masked positions get exactly zero gradient") {
  std::mt19937_64 rng(9);
  for (bool exponent : {false, true}) {
    auto rb = testing::random_rule_base(rng, 3, 3);
    rb.alpha_in_exponent = exponent;
    rb.set_active(1, 2, false);
    rb.set_active(0, 0, false);
    const auto X = testing::random_matrix(rng, 10, 3);
    const auto y = testing::random_vector(rng, 10);
    const auto g = gradients(rb, X, y, 1e-3, 1e-3);
    const auto fd = finite_diff_gradients(rb, X, y, 1e-3, 1e-3, 1e-5);
    for (auto [l, i] : {std::pair{1, 2}, std::pair{0, 0}}) {
      CHECK(g.centers(l, i) == 0.0);
      CHECK(g.widths(l, i) == 0.0);
      CHECK(g.attr_logits(l, i) == 0.0);
      CHECK(g.consequents(l, i) == 0.0);
      CHECK(std::abs(fd.centers(l, i)) < 1e-10);
      CHECK(std::abs(fd.widths(l, i)) < 1e-10);
      CHECK(std::abs(fd.attr_logits(l, i)) < 1e-10);
      CHECK(std::abs(fd.consequents(l, i)) < 1e-10);
    }
  }
}

TEST_CASE("finite differences converge at second order on the consequents") {
  std::mt19937_64 rng(21);
  const auto rb = testing::random_rule_base(rng, 2, 3);
  const auto X = testing::random_matrix(rng, 8, 3);
  const auto y = testing::random_vector(rng, 8);
  const auto exact = gradients(rb, X, y, 0.0, 0.0);
  // Loss is quadratic in c, so central differences are exact up to round-off
  // there; for v (non-quadratic) the error must shrink about 4x when h halves.
  const auto coarse = finite_diff_gradients(rb, X, y, 0.0, 0.0, 1e-2);
  const auto fine = finite_diff_gradients(rb, X, y, 0.0, 0.0, 5e-3);
  for (std::size_t k = 0; k < exact.consequents.data().size(); ++k) {
    CHECK(std::abs(coarse.consequents.data()[k] - exact.consequents.data()[k]) < 1e-10);
  }
  double err_coarse = 0.0, err_fine = 0.0;
  for (std::size_t k = 0; k < exact.centers.data().size(); ++k) {
    err_coarse = std::max(err_coarse, std::abs(coarse.centers.data()[k] - exact.centers.data()[k]));
    err_fine = std::max(err_fine, std::abs(fine.centers.data()[k] - exact.centers.data()[k]));
  }
  REQUIRE(err_coarse > 0.0);
  CHECK(err_fine / err_coarse == doctest::Approx(0.25).epsilon(0.1));
  const auto richardson_ok = [&] {
    for (std::size_t k = 0; k < exact.centers.data().size(); ++k) {
      const double r = (4.0 * fine.centers.data()[k] - coarse.centers.data()[k]) / 3.0;
      if (std::abs(r - exact.centers.data()[k]) > err_fine * 0.1 + 1e-12) return false;
    }
    return true;
  }();
  CHECK(richardson_ok);
}

TEST_CASE("non-finite gradients name the parameter block") {
  RuleBase rb(1, 1);
  rb.consequents(0, 0) = std::numeric_limits<double>::infinity();
  const Matrix X(1, 1, 1.0);
  const std::vector<double> y{0.0};
  try {
    (void)gradients(rb, X, y, 0.0, 0.0);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("parameter block") != std::string::npos);
  }
}

TEST_CASE("Adam updates") {
  std::mt19937_64 rng(5);
  SUBCASE("zero gradient leaves parameters unchanged") {
    auto rb = testing::random_rule_base(rng, 2, 2);
    const auto before = rb;
    AdamState state(rb);
    adam_step(state, rb, Gradients::zeros_like(rb), 0.01);
    CHECK(rb == before);
    CHECK(state.step == 1);
  }
  SUBCASE("first step moves each parameter by about lr against the gradient sign") {
    auto rb = testing::random_rule_base(rng, 2, 2);
    const auto before = rb;
    auto g = Gradients::zeros_like(rb);
    for (auto block : param_blocks(g)) {
      for (auto& v : block) v = 0.3;
    }
    g.centers(0, 0) = -2.0;
    AdamState state(rb);
    adam_step(state, rb, g, 0.01);
    CHECK(rb.centers(0, 0) - before.centers(0, 0) == doctest::Approx(0.01).epsilon(1e-6));
    CHECK(rb.consequents(1, 1) - before.consequents(1, 1) == doctest::Approx(-0.01).epsilon(1e-6));
  }
  SUBCASE("widths pushed below the floor are clamped") {
    auto rb = testing::random_rule_base(rng, 1, 1);
    rb.widths(0, 0) = rb.width_floor * 1.5;
    auto g = Gradients::zeros_like(rb);
    g.widths(0, 0) = 1.0;
    AdamState state(rb);
    adam_step(state, rb, g, 0.5);
    CHECK(rb.widths(0, 0) == rb.width_floor);
  }
  SUBCASE("stale state after a structural change is refused") {
    auto rb = testing::random_rule_base(rng, 3, 2);
    AdamState state(rb);
    rb.remove_rule(0);
    CHECK_FALSE(state.matches(rb));
    CHECK_THROWS_AS(adam_step(state, rb, Gradients::zeros_like(rb), 0.01), ShapeError);
    state = AdamState(rb);
    CHECK(state.step == 0);
    CHECK(state.matches(rb));
  }
}

TEST_CASE("full-batch descent with small steps does not increase the loss") {
  std::mt19937_64 rng(17);
  auto rb = testing::random_rule_base(rng, 3, 2);
  const auto X = testing::random_matrix(rng, 20, 2);
  const auto y = testing::random_vector(rng, 20);
  double previous = loss(rb, X, y, 0.0, 0.0);
  for (int step = 0; step < 100; ++step) {
    const auto g = gradients(rb, X, y, 0.0, 0.0);
    auto params = param_blocks(rb);
    const auto grads = param_blocks(g);
    for (std::size_t b = 0; b < params.size(); ++b) {
      for (std::size_t k = 0; k < params[b].size(); ++k) params[b][k] -= 1e-3 * grads[b][k];
    }
    rb.clamp_widths();
    const double current = loss(rb, X, y, 0.0, 0.0);
    CHECK(current <= previous + 1e-15);
    previous = current;
  }
}

TEST_CASE("rollback decision thresholds") {
  RuleBase prev(1, 1);
  prev.consequents(0, 0) = 1.0;
  const Matrix X(1, 1, 1.0);
  const double base = predict(prev, X.row(0));
  // Targets chosen so prev has RMSE exactly 1.
  const std::vector<double> y{base + 1.0};
  CHECK(evaluate_rollback(prev, prev, X, y, 0.02) == RollbackDecision::keep);
  auto worse = prev;
  worse.consequents(0, 0) = 1.0 - 0.1 / (base / 1.0);  // RMSE 1.1
  CHECK(evaluate_rollback(prev, worse, X, y, 0.02) == RollbackDecision::restore);
  auto slightly = prev;
  slightly.consequents(0, 0) = 1.0 - 0.01 / (base / 1.0);  // RMSE 1.01
  CHECK(evaluate_rollback(prev, slightly, X, y, 0.02) == RollbackDecision::keep);
}

TEST_CASE("fit with every structural mechanism off keeps the structure fixed") {
  TrainConfig cfg;
  cfg.epochs = 60;
  cfg.max_rules = 3;
  cfg.ap_enabled = false;
  cfg.rgrp_enabled = false;
  cfg.seed = 4;
  const auto data = small_split(1);
  const auto result = fit(data, cfg);
  CHECK(result.log.events.empty());
  CHECK(result.model.num_rules() == 3);
  CHECK(result.model.active_total() == 3 * data.X_train.cols());
  for (const auto& rec : result.log.epochs) {
    CHECK(rec.rules == 3);
    CHECK(rec.active_attrs == 3 * data.X_train.cols());
  }
  CHECK(result.log.epochs.size() == 60);
}

TEST_CASE("fit is a pure function of data and configuration") {
  TrainConfig cfg;
  cfg.epochs = 120;
  cfg.max_rules = 4;
  cfg.patience = 5;
  cfg.prune_attr_freq = 10;
  cfg.prune_rule_freq = 20;
  cfg.seed = 99;
  const auto data = small_split(2);
  const auto a = fit(data, cfg);
  const auto b = fit(data, cfg);
  std::ostringstream la, lb;
  a.log.write_jsonl(la);
  b.log.write_jsonl(lb);
  CHECK(la.str() == lb.str());
  CHECK(a.model == b.model);
  cfg.seed = 100;
  const auto c = fit(data, cfg);
  CHECK_FALSE(c.model == a.model);
}

TEST_CASE("fit returns the best-validation snapshot and logs consistently") {
  TrainConfig cfg;
  cfg.epochs = 150;
  cfg.max_rules = 4;
  cfg.patience = 5;
  cfg.prune_attr_freq = 10;
  cfg.prune_rule_freq = 20;
  cfg.seed = 3;
  const auto data = small_split(3);
  const auto result = fit(data, cfg);
  const double recomputed = rmse(predict_batch(result.model, data.X_val), data.y_val);
  CHECK(recomputed == doctest::Approx(result.best_val_rmse).epsilon(1e-12));
  double best = std::numeric_limits<double>::infinity();
  for (const auto& rec : result.log.epochs) {
    best = std::min(best, rec.val_rmse);
    CHECK(rec.best_val_rmse <= best + 1e-15);
    CHECK(rec.rules >= 1);
    CHECK(rec.rules <= cfg.max_rules);
    CHECK(rec.active_attrs >= rec.rules);
  }
  CHECK(result.log.initial.num_rules() == cfg.starting_rules());
  // The JSONL log holds one line per epoch plus one per event.
  std::ostringstream os;
  result.log.write_jsonl(os);
  std::size_t lines = 0;
  for (char ch : os.str()) lines += ch == '\n';
  CHECK(lines == result.log.epochs.size() + result.log.events.size());
}

TEST_CASE("fit grows rules on the piecewise target and beats a frozen two-rule model") {
  auto ds = synthesize(SynthKind::piecewise_linear, 600, 1, 0.05, 8);
  const auto data = ds.train_val();
  TrainConfig cfg;
  cfg.epochs = 400;
  cfg.max_rules = 8;
  cfg.initial_rules = 2;
  cfg.seed = 12;
  const auto adaptive = fit(data, cfg);
  CHECK(adaptive.log.count(EventKind::grow) >= 1);
  auto frozen_cfg = cfg;
  frozen_cfg.rgrp_enabled = false;
  frozen_cfg.max_rules = 2;
  const auto frozen = fit(data, frozen_cfg);
  CHECK(adaptive.model.num_rules() > 2);
  CHECK(adaptive.best_val_rmse < frozen.best_val_rmse);
}

TEST_CASE("fit validates its inputs") {
  TrainConfig cfg;
  cfg.epochs = 1;
  auto data = small_split(4);
  auto bad = cfg;
  bad.learning_rate = 0.0;
  CHECK_THROWS_AS(fit(data, bad), ConfigError);
  auto empty_val = data;
  empty_val.X_val = Matrix(0, data.X_train.cols());
  empty_val.y_val.clear();
  CHECK_THROWS_AS(fit(empty_val, cfg), ConfigError);
  auto ragged = data;
  ragged.y_train.pop_back();
  CHECK_THROWS_AS(fit(ragged, cfg), ShapeError);
}
