#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "symbreak/error.hpp"
#include "symbreak/stats.hpp"

using namespace symbreak;
using namespace symbreak::harness;

namespace {

// Two-sided permutation p-value of the rank sum of `a`, by visiting every
// split of the pooled sample. Ranks are computed independently of the library.
double brute_force_ranksum_p(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> pooled(a);
  pooled.insert(pooled.end(), b.begin(), b.end());
  const std::size_t n = pooled.size();
  std::vector<double> rank(n);
  for (std::size_t i = 0; i < n; ++i) {
    double below = 0.0, equal = 0.0;
    for (double v : pooled) {
      below += v < pooled[i];
      equal += v == pooled[i];
    }
    rank[i] = below + (equal + 1.0) / 2.0;
  }
  double observed = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) observed += rank[i];

  std::vector<bool> pick(n, false);
  std::fill(pick.begin(), pick.begin() + static_cast<long>(a.size()), true);
  double total = 0.0, le = 0.0, ge = 0.0;
  std::sort(pick.begin(), pick.end());
  do {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += pick[i] ? rank[i] : 0.0;
    total += 1.0;
    le += s <= observed + 1e-9;
    ge += s >= observed - 1e-9;
  } while (std::next_permutation(pick.begin(), pick.end()));
  return std::min(1.0, 2.0 * std::min(le, ge) / total);
}

}  // namespace

TEST_CASE("Kruskal-Wallis") {
  SUBCASE("hand computed") {
    // Ranks 1..3 and 4..6: H = 12/(6*7) * (36/3 + 225/3) - 21 = 27/7.
    const auto r = kruskal_wallis({{1, 2, 3}, {10, 20, 30}});
    CHECK(r.statistic == doctest::Approx(27.0 / 7.0).epsilon(1e-12));
    CHECK(r.p_value == doctest::Approx(std::erfc(std::sqrt(27.0 / 14.0))).epsilon(1e-12));  // chi-square, 1 df
    CHECK(r.p_value == doctest::Approx(0.0495).epsilon(1e-3));
  }
  SUBCASE("identical values") {
    const auto r = kruskal_wallis({{4, 4, 4}, {4, 4}});
    CHECK(r.statistic == 0.0);
    CHECK(r.p_value == 1.0);
  }
  SUBCASE("reference values") {
    // Computed with scipy.stats.kruskal.
    const auto shifted = kruskal_wallis({{1.1, 2.3, 0.4, 1.9, 1.2}, {1.5, 0.7, 2.2, 1.0, 1.4}, {9.1, 8.7, 10.2, 9.9, 8.8}});
    CHECK(shifted.statistic == doctest::Approx(9.38).epsilon(1e-10));
    CHECK(shifted.p_value == doctest::Approx(0.009186686156244689).epsilon(1e-10));
    CHECK(shifted.p_value < 0.05);
    const auto ties = kruskal_wallis({{1, 1, 2, 2, 3}, {2, 3, 3, 4, 4}, {1, 2, 2, 3, 5, 5}});
    CHECK(ties.statistic == doctest::Approx(3.7744565217391415).epsilon(1e-10));
    CHECK(ties.p_value == doctest::Approx(0.15149112132439418).epsilon(1e-10));
  }
  CHECK_THROWS_AS(kruskal_wallis({{1.0}}), ContractError);
  CHECK_THROWS_AS(kruskal_wallis({{1.0}, {}}), ContractError);
}

TEST_CASE("Wilcoxon rank-sum, exact") {
  const std::vector<double> a = {1, 2, 3, 4}, b = {10, 11, 12, 13};
  const auto r = wilcoxon_ranksum(a, b);
  CHECK(r.exact);
  CHECK(r.p_value == doctest::Approx(2.0 / 70.0).epsilon(1e-12));
  CHECK(wilcoxon_ranksum(b, a).p_value == r.p_value);
  CHECK(wilcoxon_ranksum(a, a).p_value == 1.0);

  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> value(0, 6);  // coarse values force ties
  std::uniform_int_distribution<int> size(1, 7);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> x(static_cast<std::size_t>(size(rng))), y(static_cast<std::size_t>(size(rng)));
    for (auto& v : x) v = value(rng);
    for (auto& v : y) v = value(rng) + 0.5 * (t % 3);
    CAPTURE(t);
    CHECK(wilcoxon_ranksum(x, y).p_value == doctest::Approx(brute_force_ranksum_p(x, y)).epsilon(1e-12));
  }
}

TEST_CASE("Wilcoxon rank-sum, normal approximation") {
  // Reference values from scipy.stats.mannwhitneyu(method="asymptotic", use_continuity=True).
  const std::vector<double> a = {0.3, 1.2, 2.5, 0.8, 1.9, 2.2, 0.1, 1.4, 3.3, 2.8, 0.9, 1.7};
  const std::vector<double> b = {1.1, 2.9, 3.5, 2.4, 4.1, 3.8, 2.0, 3.1, 4.4, 2.6, 3.9, 1.5};
  const auto r = wilcoxon_ranksum(a, b);
  CHECK_FALSE(r.exact);
  CHECK(r.p_value == doctest::Approx(0.007259954988190575).epsilon(1e-9));
  CHECK(wilcoxon_ranksum(b, a).p_value == r.p_value);

  const std::vector<double> c = {1, 2, 2, 3, 3, 3, 4, 5, 5, 6, 7, 8};
  const std::vector<double> d = {3, 4, 4, 5, 5, 6, 6, 7, 8, 8, 9, 9, 10};
  CHECK(wilcoxon_ranksum(c, d).p_value == doctest::Approx(0.017210656509427717).epsilon(1e-9));

  std::vector<double> same(15, 2.0);
  CHECK(wilcoxon_ranksum(same, same).p_value == 1.0);
  CHECK(wilcoxon_ranksum(c, c).p_value == 1.0);
  CHECK_THROWS_AS(wilcoxon_ranksum({}, c), ContractError);
}

TEST_CASE("descriptive statistics") {
  CHECK(mean({1, 2, 3, 6}) == 3.0);
  CHECK(median({5, 1, 3}) == 3.0);
  CHECK(median({4, 1, 3, 2}) == 2.5);
  CHECK(sample_sd({2, 4, 4, 4, 5, 5, 7, 9}) == doctest::Approx(std::sqrt(32.0 / 7.0)));
}

TEST_CASE("family normalization") {
  SUBCASE("divide by the largest mean") {
    const FamilyRow row = normalize_report({{"DE", {2.0, 2.0}}, {"DE-INV-SB", {3.0, 5.0}}, {"DE-SB", {1.0}}});
    CHECK(row.normalized_mean == std::vector<double>{0.5, 1.0, 0.25});
    CHECK(row.normalized_sd[1] == doctest::Approx(std::sqrt(2.0) / 4.0));
    CHECK(row.best == 2);
  }
  SUBCASE("equal means") {
    const FamilyRow row = normalize_report({{"A", {3.0}}, {"B", {3.0}}, {"C", {3.0}}});
    CHECK(row.normalized_mean == std::vector<double>{1.0, 1.0, 1.0});
  }
  SUBCASE("optional fourth member shares the divisor") {
    const FamilyRow row = normalize_report({{"A", {4.0}}, {"B", {2.0}}, {"C", {1.0}}, {"D", {8.0}}});
    CHECK(row.normalized_mean[3] == 2.0);
    CHECK(row.best == 2);
  }
  CHECK_THROWS_AS(normalize_report({{"A", {1.0}}, {"B", {2.0}}}), InputError);
}

TEST_CASE("report assembly") {
  const std::vector<MethodSamples> samples = {
      {"DE", {5, 6, 7, 8, 9}}, {"DE-INV-SB", {4, 5, 6, 7, 8}}, {"DE-SB", {1, 2, 3, 2, 1}}, {"CMA-ES", {1, 1, 2}}};
  const StatReport rep = build_report(samples, {{"DE", "DE-INV-SB", "DE-SB", "DE-SB-BF"},
                                                {"CMA-ES", "CMA-ES-INV-SB", "CMA-ES-SB", "CMA-ES-SB-BF"}});
  REQUIRE(rep.families.size() == 1);
  CHECK(rep.families[0].methods[rep.families[0].best] == "DE-SB");
  REQUIRE(rep.notes.size() == 1);
  CHECK(rep.notes[0].find("CMA-ES-INV-SB") != std::string::npos);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    CHECK(rep.wilcoxon_p[i][i] == 1.0);
    for (std::size_t j = 0; j < samples.size(); ++j) {
      CHECK(rep.wilcoxon_p[i][j] == rep.wilcoxon_p[j][i]);
      CHECK(rep.wilcoxon_p[i][j] >= 0.0);
      CHECK(rep.wilcoxon_p[i][j] <= 1.0);
    }
  }
  CHECK(rep.kruskal.p_value < 0.05);
  const std::string text = rep.to_text();
  CHECK(text.find("**DE-SB") != std::string::npos);
  CHECK(text.find("Kruskal-Wallis") != std::string::npos);
}
