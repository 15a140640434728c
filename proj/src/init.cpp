#include "adar/init.hpp"

#include <algorithm>
#include <cmath>

#include "adar/kmeans.hpp"
#include "adar/random.hpp"

namespace adar {

std::vector<double> column_mean(const Matrix& X, std::span<const std::size_t> rows) {
  std::vector<double> mean(X.cols(), 0.0);
  if (rows.empty()) return mean;
  for (auto r : rows) {
    for (std::size_t i = 0; i < X.cols(); ++i) mean[i] += X(r, i);
  }
  for (auto& m : mean) m /= static_cast<double>(rows.size());
  return mean;
}

std::vector<double> column_std(const Matrix& X, std::span<const std::size_t> rows, double floor) {
  const auto mean = column_mean(X, rows);
  std::vector<double> var(X.cols(), 0.0);
  for (auto r : rows) {
    for (std::size_t i = 0; i < X.cols(); ++i) {
      const double d = X(r, i) - mean[i];
      var[i] += d * d;
    }
  }
  std::vector<double> out(X.cols());
  for (std::size_t i = 0; i < X.cols(); ++i) {
    const double s = rows.empty() ? 0.0 : std::sqrt(var[i] / static_cast<double>(rows.size()));
    out[i] = std::max(s, floor);
  }
  return out;
}

void sample_rule_parameters(std::mt19937_64& rng, const TrainConfig& cfg, std::span<double> attr_logits,
                            std::span<double> consequents) {
  std::normal_distribution<double> attr(0.0, cfg.attr_logit_init_std);
  std::normal_distribution<double> cons(0.0, cfg.consequent_init_std);
  for (auto& a : attr_logits) a = cfg.attr_logit_init_std > 0.0 ? attr(rng) : 0.0;
  for (auto& c : consequents) c = cfg.consequent_init_std > 0.0 ? cons(rng) : 0.0;
}

RuleBase init_rulebase(const Matrix& X, std::size_t k, std::uint64_t seed, const TrainConfig& cfg) {
  const auto km = kmeans(X, k, seed);
  const auto d = X.cols();
  std::mt19937_64 rng(derive_seed({seed, 0x1417}));

  RuleBase rb;
  rb.use_bias = cfg.use_bias;
  rb.strict_mask_product = cfg.strict_mask_product;
  rb.alpha_in_exponent = cfg.alpha_in_exponent;
  rb.epsilon = cfg.epsilon;
  rb.width_floor = cfg.width_floor;

  std::vector<std::vector<std::size_t>> members(k);
  for (std::size_t r = 0; r < X.rows(); ++r) members[km.assignments[r]].push_back(r);

  std::vector<double> attr(d), cons(d);
  for (std::size_t c = 0; c < k; ++c) {
    const auto width = column_std(X, members[c], cfg.width_floor);
    sample_rule_parameters(rng, cfg, attr, cons);
    rb.append_rule(km.centers.row(c), width, attr, cfg.rule_logit_init, cons);
  }
  return rb;
}

}  // namespace adar
