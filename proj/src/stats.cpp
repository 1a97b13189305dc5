#include "symbreak/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <sstream>

#include <boost/math/special_functions/gamma.hpp>

#include "symbreak/error.hpp"

namespace symbreak::harness {

namespace {

struct Ranked {
  std::vector<double> ranks;  // midranks, aligned with the pooled input order
  double tie_term = 0.0;      // sum over tie groups of t^3 - t
};

Ranked midranks(const std::vector<double>& pooled) {
  const std::size_t n = pooled.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return pooled[a] < pooled[b]; });
  Ranked r;
  r.ranks.resize(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && pooled[order[j + 1]] == pooled[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r.ranks[order[k]] = rank;
    const double t = static_cast<double>(j - i + 1);
    r.tie_term += t * t * t - t;
    i = j + 1;
  }
  return r;
}

}  // namespace

KruskalWallis kruskal_wallis(const std::vector<std::vector<double>>& groups) {
  require(groups.size() >= 2, "kruskal_wallis: need at least two groups");
  std::vector<double> pooled;
  for (const auto& g : groups) {
    require(!g.empty(), "kruskal_wallis: empty group");
    pooled.insert(pooled.end(), g.begin(), g.end());
  }
  const double n = static_cast<double>(pooled.size());
  const Ranked r = midranks(pooled);
  const double correction = 1.0 - r.tie_term / (n * n * n - n);
  KruskalWallis out;
  if (!(correction > 0.0)) return out;  // every value identical

  double sum = 0.0;
  std::size_t offset = 0;
  for (const auto& g : groups) {
    double rank_sum = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) rank_sum += r.ranks[offset + i];
    sum += rank_sum * rank_sum / static_cast<double>(g.size());
    offset += g.size();
  }
  const double h = (12.0 / (n * (n + 1.0)) * sum - 3.0 * (n + 1.0)) / correction;
  out.statistic = std::max(h, 0.0);
  const double df = static_cast<double>(groups.size() - 1);
  out.p_value = boost::math::gamma_q(0.5 * df, 0.5 * out.statistic);
  return out;
}

RankSum wilcoxon_ranksum(const std::vector<double>& a, const std::vector<double>& b) {
  require(!a.empty() && !b.empty(), "wilcoxon_ranksum: samples must be nonempty");
  std::vector<double> pooled(a);
  pooled.insert(pooled.end(), b.begin(), b.end());
  const Ranked r = midranks(pooled);
  const std::size_t na = a.size();
  const std::size_t nb = b.size();
  const double n = static_cast<double>(na + nb);

  RankSum out;
  out.statistic = std::accumulate(r.ranks.begin(), r.ranks.begin() + static_cast<long>(na), 0.0);

  if (std::min(na, nb) < kExactRankSumLimit) {
    // Enumerate the rank sum of the smaller sample over all subsets of its
    // size. Midranks are integers or half integers; doubling makes them integral.
    const bool first_small = na <= nb;
    const std::size_t k = first_small ? na : nb;
    std::vector<long> doubled(r.ranks.size());
    for (std::size_t i = 0; i < r.ranks.size(); ++i) doubled[i] = std::lround(2.0 * r.ranks[i]);
    long observed = 0;
    for (std::size_t i = 0; i < na + nb; ++i) {
      if ((i < na) == first_small) observed += doubled[i];
    }
    std::vector<long> sorted = doubled;
    std::sort(sorted.rbegin(), sorted.rend());
    const long max_sum = std::accumulate(sorted.begin(), sorted.begin() + static_cast<long>(k), 0L);
    // ways[c][s]: number of c-subsets of the items seen so far with doubled rank sum s.
    std::vector<std::vector<double>> ways(k + 1, std::vector<double>(static_cast<std::size_t>(max_sum) + 1, 0.0));
    ways[0][0] = 1.0;
    for (long item : doubled) {
      for (std::size_t c = k; c >= 1; --c) {
        auto& to = ways[c];
        const auto& from = ways[c - 1];
        for (long s = max_sum; s >= item; --s) to[static_cast<std::size_t>(s)] += from[static_cast<std::size_t>(s - item)];
      }
    }
    double total = 0.0, le = 0.0, ge = 0.0;
    for (long s = 0; s <= max_sum; ++s) {
      const double w = ways[k][static_cast<std::size_t>(s)];
      total += w;
      if (s <= observed) le += w;
      if (s >= observed) ge += w;
    }
    out.exact = true;
    out.p_value = std::min(1.0, 2.0 * std::min(le, ge) / total);
    return out;
  }

  const double expected = static_cast<double>(na) * (n + 1.0) / 2.0;
  const double variance =
      static_cast<double>(na) * static_cast<double>(nb) / 12.0 * ((n + 1.0) - r.tie_term / (n * (n - 1.0)));
  if (!(variance > 0.0)) return out;
  const double z = std::max(std::abs(out.statistic - expected) - 0.5, 0.0) / std::sqrt(variance);
  out.p_value = std::min(1.0, std::erfc(z / std::sqrt(2.0)));
  return out;
}

double mean(const std::vector<double>& v) {
  require(!v.empty(), "mean of an empty sample");
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_sd(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

double median(std::vector<double> v) {
  require(!v.empty(), "median of an empty sample");
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

FamilyRow normalize_report(const std::vector<MethodSamples>& family) {
  if (family.size() < 3 || family.size() > 4) {
    throw InputError("normalize_report: a family needs its regular, invariant and MGOP members");
  }
  FamilyRow row;
  for (const auto& [name, values] : family) {
    if (values.empty()) throw InputError("normalize_report: no results for " + name);
    row.methods.push_back(name);
    row.mean.push_back(mean(values));
    row.sd.push_back(sample_sd(values));
  }
  const double scale = std::max({row.mean[0], row.mean[1], row.mean[2]});
  for (std::size_t i = 0; i < row.mean.size(); ++i) {
    row.normalized_mean.push_back(scale > 0.0 ? row.mean[i] / scale : 1.0);
    row.normalized_sd.push_back(scale > 0.0 ? row.sd[i] / scale : 0.0);
  }
  row.best = static_cast<std::size_t>(std::min_element(row.mean.begin(), row.mean.begin() + 3) - row.mean.begin());
  return row;
}

StatReport build_report(const std::vector<MethodSamples>& samples,
                        const std::vector<std::vector<std::string>>& families) {
  StatReport rep;
  rep.samples = samples;
  const std::size_t m = samples.size();
  rep.wilcoxon_p.assign(m, std::vector<double>(m, 1.0));
  if (m >= 2) {
    std::vector<std::vector<double>> groups;
    for (const auto& s : samples) groups.push_back(s.second);
    rep.kruskal = kruskal_wallis(groups);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = i + 1; j < m; ++j) {
        const double p = wilcoxon_ranksum(samples[i].second, samples[j].second).p_value;
        rep.wilcoxon_p[i][j] = rep.wilcoxon_p[j][i] = p;
      }
    }
  }
  std::map<std::string, const std::vector<double>*> by_name;
  for (const auto& s : samples) by_name[s.first] = &s.second;
  for (const auto& members : families) {
    std::vector<MethodSamples> family;
    std::string missing;
    for (std::size_t i = 0; i < members.size(); ++i) {
      const auto it = by_name.find(members[i]);
      if (it != by_name.end()) {
        family.emplace_back(members[i], *it->second);
      } else if (i < 3) {
        missing += (missing.empty() ? "" : ", ") + members[i];
      }
    }
    if (family.empty()) continue;
    if (!missing.empty()) {
      rep.notes.push_back("family of " + members[0] + " not normalized, missing: " + missing);
      continue;
    }
    rep.families.push_back(normalize_report(family));
  }
  return rep;
}

std::string StatReport::to_text() const {
  std::ostringstream out;
  char buf[256];
  out << "method                 n      mean          sd            median\n";
  for (const auto& [name, v] : samples) {
    std::snprintf(buf, sizeof buf, "%-18s %5zu  %-13.6g %-13.6g %-13.6g\n", name.c_str(), v.size(), mean(v),
                  sample_sd(v), median(v));
    out << buf;
  }
  if (samples.size() >= 2) {
    std::snprintf(buf, sizeof buf, "\nKruskal-Wallis: H = %.6g, p = %.6g%s\n", kruskal.statistic, kruskal.p_value,
                  kruskal.p_value < 0.05 ? " (significant at 0.05)" : "");
    out << buf << "\nWilcoxon rank-sum p-values:\n";
    for (std::size_t i = 0; i < samples.size(); ++i) {
      for (std::size_t j = i + 1; j < samples.size(); ++j) {
        std::snprintf(buf, sizeof buf, "  %-16s vs %-16s p = %.6g%s\n", samples[i].first.c_str(),
                      samples[j].first.c_str(), wilcoxon_p[i][j], wilcoxon_p[i][j] < 0.05 ? " *" : "");
        out << buf;
      }
    }
  }
  if (!families.empty()) out << "\nNormalized mean +- sd (best marked with **):\n";
  for (const auto& row : families) {
    for (std::size_t i = 0; i < row.methods.size(); ++i) {
      const char* mark = i == row.best ? "**" : "  ";
      std::snprintf(buf, sizeof buf, "  %s%s %.3f +- %.3f%s", mark, row.methods[i].c_str(), row.normalized_mean[i],
                    row.normalized_sd[i], mark);
      out << buf;
    }
    out << '\n';
  }
  for (const auto& note : notes) out << "note: " << note << '\n';
  return out.str();
}

}  // namespace symbreak::harness
