#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "adar/csv.hpp"
#include "adar/data.hpp"
#include "adar/error.hpp"

using namespace adar;

namespace {

// Least squares by normal equations with partial-pivot elimination.
std::vector<double> least_squares(const std::vector<std::vector<double>>& A, const std::vector<double>& b) {
  const auto p = A.front().size();
  std::vector<std::vector<double>> M(p, std::vector<double>(p + 1, 0.0));
  for (std::size_t r = 0; r < A.size(); ++r) {
    for (std::size_t i = 0; i < p; ++i) {
      for (std::size_t j = 0; j < p; ++j) M[i][j] += A[r][i] * A[r][j];
      M[i][p] += A[r][i] * b[r];
    }
  }
  for (std::size_t c = 0; c < p; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < p; ++r) {
      if (std::abs(M[r][c]) > std::abs(M[piv][c])) piv = r;
    }
    std::swap(M[c], M[piv]);
    for (std::size_t r = 0; r < p; ++r) {
      if (r == c) continue;
      const double f = M[r][c] / M[c][c];
      for (std::size_t k = c; k <= p; ++k) M[r][k] -= f * M[c][k];
    }
  }
  std::vector<double> x(p);
  for (std::size_t i = 0; i < p; ++i) x[i] = M[i][p] / M[i][i];
  return x;
}

}  // namespace

TEST_CASE("CSV reader handles quoting and line endings") {
  const auto rows = parse_csv("a,b,c\r\n1,\"x,y\",\"say \"\"hi\"\"\"\n2,\"multi\nline\",\n");
  REQUIRE(rows.size() == 3);
  CHECK(rows[0] == CsvRow{"a", "b", "c"});
  CHECK(rows[1] == CsvRow{"1", "x,y", "say \"hi\""});
  CHECK(rows[2] == CsvRow{"2", "multi\nline", ""});
  CHECK_THROWS_AS(parse_csv("a,\"b\n"), SchemaError);
  CHECK(csv_escape("plain") == "plain");
  CHECK(csv_escape("a,b") == "\"a,b\"");
  CHECK(csv_escape("q\"") == "\"q\"\"\"");
}

TEST_CASE("loading with the drop policy discards incomplete rows") {
  const std::string text =
      "y,a,b\n1,1,2\n2,2,3\n,3,4\n4,4,5\n5,?,6\n6,6,7\nNA,7,8\n8,8,9\n9,9,10\n10,10,11\n";
  CsvSchema schema{"y", {"a", "b"}, MissingPolicy::drop};
  const auto table = parse_csv_table(text, schema);
  CHECK(table.y.size() == 7);
  CHECK(table.dropped_rows == 3);
  CHECK(table.feature_names == std::vector<std::string>{"a", "b"});

  // Only the two missing targets: 8 rows survive.
  const std::string targets_only = "y,a\n1,1\n2,2\n,3\n4,4\n5,5\n6,6\nNA,7\n8,8\n9,9\n10,10\n";
  const auto t2 = parse_csv_table(targets_only, CsvSchema{"y", {"a"}, MissingPolicy::drop});
  CHECK(t2.y.size() == 8);
  CHECK(t2.dropped_rows == 2);
}

TEST_CASE("mean imputation fills missing feature cells") {
  const auto table = parse_csv_table("t,v\n1,1\n2,\n3,3\n", CsvSchema{"t", {"v"}, MissingPolicy::impute_mean});
  REQUIRE(table.X.rows() == 3);
  CHECK(table.X(1, 0) == 2.0);
  CHECK(table.imputed_cells == 1);
  // Missing targets are dropped even under imputation.
  const auto t2 = parse_csv_table("t,v\n1,1\n,5\n3,3\n", CsvSchema{"t", {"v"}, MissingPolicy::impute_mean});
  CHECK(t2.y.size() == 2);
}

TEST_CASE("schema errors name the missing column") {
  try {
    (void)parse_csv_table("a,b\n1,2\n", CsvSchema{"a", {"zeta"}, MissingPolicy::drop});
    FAIL("expected SchemaError");
  } catch (const SchemaError& e) {
    CHECK(std::string(e.what()).find("zeta") != std::string::npos);
  }
  CHECK_THROWS_AS(load_csv("/nonexistent/file.csv", CsvSchema{"a", {}, MissingPolicy::drop}), SchemaError);
  const auto all = parse_csv_table("a,b,c\n1,2,3\n", CsvSchema{"b", {}, MissingPolicy::drop});
  CHECK(all.feature_names == std::vector<std::string>{"a", "c"});
  // Implicit selection skips text columns; naming one explicitly is an error.
  const auto text_col = parse_csv_table("y,a,name\n1,2,ford\n3,4,fiat\n", CsvSchema{"y", {}, MissingPolicy::drop});
  CHECK(text_col.feature_names == std::vector<std::string>{"a"});
  CHECK(text_col.y.size() == 2);
  CHECK_THROWS_AS(parse_csv_table("y,a,name\n1,2,ford\n", CsvSchema{"y", {"name"}, MissingPolicy::drop}), SchemaError);
  CHECK_THROWS_AS(parse_csv_table("y,a,b\n1,2,\n3,,4\n", CsvSchema{"y", {}, MissingPolicy::drop}), SchemaError);
  CHECK(missing_policy_from_string("impute_mean") == MissingPolicy::impute_mean);
  CHECK_THROWS_AS(missing_policy_from_string("guess"), ConfigError);
}

TEST_CASE("standardization uses population statistics") {
  RawTable t;
  t.feature_names = {"a"};
  t.X = Matrix(12, 1);
  t.y.resize(12);
  for (std::size_t r = 0; r < 12; ++r) {
    t.X(r, 0) = static_cast<double>(2 * (r % 3));  // 0, 2, 4 repeated
    t.y[r] = static_cast<double>(r);
  }
  const auto ds = standardize(t, "toy", 1);
  CHECK(ds.X(0, 0) == doctest::Approx(-1.2247449));
  CHECK(ds.X(1, 0) == doctest::Approx(0.0));
  CHECK(ds.X(2, 0) == doctest::Approx(1.2247449));
  CHECK(ds.stats.x_mean[0] == 2.0);
  CHECK(ds.stats.destandardize_y(ds.y[5]) == doctest::Approx(5.0));
  t.X = Matrix(12, 1, 3.0);
  CHECK_THROWS_AS(standardize(t, "flat", 1), ConfigError);
}

TEST_CASE("split sizes and determinism") {
  const auto a = split(100, 4);
  CHECK(a.train.size() == 64);
  CHECK(a.val.size() == 16);
  CHECK(a.test.size() == 20);
  const auto b = split(100, 4);
  CHECK(a.train == b.train);
  CHECK(a.val == b.val);
  CHECK(a.test == b.test);
  const auto c = split(100, 5);
  CHECK(c.train.size() == 64);
  CHECK(c.train != a.train);
  CHECK_THROWS_AS(split(9, 0), ConfigError);
}

TEST_CASE("splits are disjoint and cover every row") {
  std::mt19937_64 rng(55);
  std::uniform_int_distribution<std::size_t> size(10, 500);
  for (int c = 0; c < 150; ++c) {
    const auto n = size(rng);
    const auto s = split(n, rng());
    std::vector<int> seen(n, 0);
    for (const auto* part : {&s.train, &s.val, &s.test}) {
      for (auto r : *part) {
        REQUIRE(r < n);
        ++seen[r];
      }
    }
    CHECK(std::ranges::all_of(seen, [](int k) { return k == 1; }));
    CHECK_FALSE(s.train.empty());
    CHECK_FALSE(s.val.empty());
    CHECK_FALSE(s.test.empty());
  }
}

TEST_CASE("noise-free piecewise data is fit exactly by region-wise least squares") {
  for (std::size_t d : {1u, 3u}) {
    const auto synth = synthesize_table(SynthKind::piecewise_linear, 600, d, 0.0, 13);
    CHECK(synth.rules == 3);
    double sse = 0.0;
    for (int region = 0; region < 3; ++region) {
      std::vector<std::vector<double>> A;
      std::vector<double> b;
      for (std::size_t r = 0; r < synth.table.y.size(); ++r) {
        if (synth.region[r] != region) continue;
        std::vector<double> row{1.0};
        for (std::size_t i = 0; i < d; ++i) row.push_back(synth.table.X(r, i));
        A.push_back(row);
        b.push_back(synth.table.y[r]);
      }
      REQUIRE(A.size() > d + 1);
      const auto coef = least_squares(A, b);
      for (std::size_t r = 0; r < A.size(); ++r) {
        double pred = 0.0;
        for (std::size_t k = 0; k < coef.size(); ++k) pred += coef[k] * A[r][k];
        sse += (pred - b[r]) * (pred - b[r]);
      }
    }
    CHECK(std::sqrt(sse / 600.0) < 1e-6);
  }
}

TEST_CASE("noise sets a floor on the achievable error") {
  const double sigma = 0.3;
  const auto noisy = synthesize_table(SynthKind::piecewise_linear, 4000, 1, sigma, 21);
  const auto clean = synthesize_table(SynthKind::piecewise_linear, 4000, 1, 0.0, 21);
  // The clean target is the best predictor; its error is the noise itself.
  std::vector<double> residual(4000);
  for (std::size_t r = 0; r < 4000; ++r) residual[r] = noisy.table.y[r] - clean.table.y[r];
  const auto [mean, sd] = mean_std(residual);
  CHECK(std::abs(mean) < 0.05);
  CHECK(sd >= sigma * 0.95);
}

TEST_CASE("synthetic data is a pure function of its seed") {
  for (auto kind : {SynthKind::piecewise_linear, SynthKind::gaussian_bumps}) {
    const auto a = synthesize(kind, 200, 2, 0.1, 8);
    const auto b = synthesize(kind, 200, 2, 0.1, 8);
    CHECK(a.X == b.X);
    CHECK(a.y == b.y);
    CHECK(a.splits.train == b.splits.train);
    const auto c = synthesize(kind, 200, 2, 0.1, 9);
    CHECK_FALSE(a.X == c.X);
  }
  CHECK(synth_kind_from_string("gaussian_bumps") == SynthKind::gaussian_bumps);
  CHECK_THROWS_AS(synth_kind_from_string("spiral"), ConfigError);
}
