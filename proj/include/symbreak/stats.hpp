#pragma once

#include <string>
#include <utility>
#include <vector>

namespace symbreak::harness {

struct KruskalWallis {
  double statistic = 0.0;  // tie-corrected H
  double p_value = 1.0;    // chi-square approximation, k-1 degrees of freedom
};

/// Kruskal-Wallis H test over >= 2 nonempty groups. All values identical gives H = 0, p = 1.
KruskalWallis kruskal_wallis(const std::vector<std::vector<double>>& groups);

struct RankSum {
  double statistic = 0.0;  // rank sum of the first sample (midranks)
  double p_value = 1.0;    // two-sided
  bool exact = false;
};

/// Below this smaller-sample size the null distribution is enumerated exactly.
inline constexpr std::size_t kExactRankSumLimit = 10;

/// Wilcoxon rank-sum test, two-sided. Exact null distribution of the midrank
/// sum when the smaller sample has fewer than 10 values, otherwise the normal
/// approximation with tie and continuity correction.
RankSum wilcoxon_ranksum(const std::vector<double>& a, const std::vector<double>& b);

double mean(const std::vector<double>& v);
double sample_sd(const std::vector<double>& v);
double median(std::vector<double> v);

/// One row of the normalized comparison table for a method family (regular,
/// invariant breaking, MGOP breaking, optionally brute force).
struct FamilyRow {
  std::vector<std::string> methods;
  std::vector<double> mean;
  std::vector<double> sd;
  std::vector<double> normalized_mean;
  std::vector<double> normalized_sd;
  std::size_t best = 0;  // index of the smallest mean among the first three
};

using MethodSamples = std::pair<std::string, std::vector<double>>;

/// Divides each member's mean and sd by the largest mean among the first three
/// members. Needs the regular, invariant and MGOP members (a fourth member
/// is allowed and normalized with the same divisor).
FamilyRow normalize_report(const std::vector<MethodSamples>& family);

struct StatReport {
  std::vector<MethodSamples> samples;
  KruskalWallis kruskal;
  std::vector<std::vector<double>> wilcoxon_p;  // pairwise, symmetric, diagonal 1
  std::vector<FamilyRow> families;
  std::vector<std::string> notes;

  std::string to_text() const;
};

/// Kruskal-Wallis over all methods, pairwise rank-sum tests and normalized
/// family rows. `families` lists the member names of each family in order
/// (regular, invariant, MGOP[, brute force]); families with a missing member
/// are skipped with a note.
StatReport build_report(const std::vector<MethodSamples>& samples,
                        const std::vector<std::vector<std::string>>& families);

}  // namespace symbreak::harness
