#include "synmix/stats.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include <fmt/format.h>

#include "synmix/error.hpp"
#include "synmix/special.hpp"

namespace synmix::stats {

using special::normal_sf;

double mean(std::span<const double> v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_sd(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

std::vector<double> midranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = r;
    i = j + 1;
  }
  return ranks;
}

namespace {

// Sum over tie groups of t^3 - t.
double tie_term(std::span<const double> values) {
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  double total = 0.0;
  std::size_t i = 0;
  while (i < sorted.size()) {
    std::size_t j = i;
    while (j + 1 < sorted.size() && sorted[j + 1] == sorted[i]) ++j;
    const double t = static_cast<double>(j - i + 1);
    total += t * t * t - t;
    i = j + 1;
  }
  return total;
}

double poly(std::span<const double> c, double x) {
  double r = 0.0;
  for (std::size_t i = c.size(); i-- > 0;) r = r * x + c[i];
  return r;
}

void require_groups(std::span<const Sample> samples, std::size_t min_size) {
  if (samples.size() < 2) {
    throw Error(Errc::InsufficientGroups, fmt::format("{} group(s)", samples.size()));
  }
  for (const auto& s : samples) {
    if (s.values.empty()) throw Error(Errc::EmptySample, "group '" + s.label + "' is empty");
    if (s.values.size() < min_size) {
      throw Error(Errc::SampleTooSmall,
                  fmt::format("group '{}' has {} value(s), need {}", s.label, s.values.size(),
                              min_size));
    }
    for (double v : s.values) {
      if (!std::isfinite(v)) throw Error(Errc::DegenerateSamples, "non-finite value in " + s.label);
    }
  }
}

std::vector<std::size_t> sizes(std::span<const Sample> samples) {
  std::vector<std::size_t> n;
  for (const auto& s : samples) n.push_back(s.values.size());
  return n;
}

struct Anova {
  double ss_between = 0.0;
  double ss_within = 0.0;
  std::size_t total = 0;
  std::vector<double> means;
};

Anova anova_parts(std::span<const Sample> samples) {
  Anova a;
  double grand = 0.0;
  for (const auto& s : samples) {
    a.total += s.values.size();
    grand += std::accumulate(s.values.begin(), s.values.end(), 0.0);
  }
  grand /= static_cast<double>(a.total);
  for (const auto& s : samples) {
    const double m = mean(s.values);
    a.means.push_back(m);
    a.ss_between += static_cast<double>(s.values.size()) * (m - grand) * (m - grand);
    for (double v : s.values) a.ss_within += (v - m) * (v - m);
  }
  return a;
}

struct RankedGroups {
  std::vector<double> mean_rank;
  double tie = 0.0;
  std::size_t total = 0;
};

RankedGroups rank_groups(std::span<const Sample> samples) {
  std::vector<double> all;
  for (const auto& s : samples) all.insert(all.end(), s.values.begin(), s.values.end());
  const auto ranks = midranks(all);
  RankedGroups g;
  g.total = all.size();
  g.tie = tie_term(all);
  std::size_t offset = 0;
  for (const auto& s : samples) {
    double sum = 0.0;
    for (std::size_t i = 0; i < s.values.size(); ++i) sum += ranks[offset + i];
    g.mean_rank.push_back(sum / static_cast<double>(s.values.size()));
    offset += s.values.size();
  }
  return g;
}

PairwiseMatrix unit_matrix(std::span<const Sample> samples) {
  PairwiseMatrix m;
  for (const auto& s : samples) m.labels.push_back(s.label);
  const auto k = static_cast<Eigen::Index>(samples.size());
  m.p_adjusted = Eigen::MatrixXd::Ones(k, k);
  return m;
}

}  // namespace

// ---------------------------------------------------------------------------

TestResult shapiro_wilk(std::span<const double> values) {
  const std::size_t n = values.size();
  if (n < 3) throw Error(Errc::SampleTooSmall, fmt::format("n = {}, need >= 3", n));
  std::vector<double> x(values.begin(), values.end());
  std::sort(x.begin(), x.end());
  const double range = x.back() - x.front();
  if (!(range > 1e-19 * std::max(1.0, std::abs(x.front())))) {
    throw Error(Errc::ConstantSample, "all values equal");
  }

  static constexpr double c1[] = {0.0, 0.221157, -0.147981, -2.071190, 4.434685, -2.706056};
  static constexpr double c2[] = {0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633};
  static constexpr double c3[] = {0.5440, -0.39978, 0.025054, -6.714e-4};
  static constexpr double c4[] = {1.3822, -0.77857, 0.062767, -0.0020322};
  static constexpr double c5[] = {-1.5861, -0.31082, -0.083751, 0.0038915};
  static constexpr double c6[] = {-0.4803, -0.082676, 0.0030302};
  static constexpr double g[] = {-2.273, 0.459};

  const double an = static_cast<double>(n);
  const std::size_t half = n / 2;
  std::vector<double> a(half);
  if (n == 3) {
    a[0] = std::sqrt(0.5);
  } else {
    const double an25 = an + 0.25;
    double summ2 = 0.0;
    for (std::size_t i = 0; i < half; ++i) {
      a[i] = special::normal_quantile((static_cast<double>(i + 1) - 0.375) / an25);
      summ2 += a[i] * a[i];
    }
    summ2 *= 2.0;
    const double ssumm2 = std::sqrt(summ2);
    const double rsn = 1.0 / std::sqrt(an);
    const double a1 = poly(c1, rsn) - a[0] / ssumm2;
    std::size_t first;
    double fac;
    if (n > 5) {
      first = 2;
      const double a2 = -a[1] / ssumm2 + poly(c2, rsn);
      fac = std::sqrt((summ2 - 2.0 * a[0] * a[0] - 2.0 * a[1] * a[1]) /
                      (1.0 - 2.0 * a1 * a1 - 2.0 * a2 * a2));
      a[1] = a2;
    } else {
      first = 1;
      fac = std::sqrt((summ2 - 2.0 * a[0] * a[0]) / (1.0 - 2.0 * a1 * a1));
    }
    a[0] = a1;
    for (std::size_t i = first; i < half; ++i) a[i] = -a[i] / fac;
  }

  // W as the squared correlation between ordered data and the antisymmetric
  // coefficient vector; 1 - W is formed directly to limit cancellation.
  std::vector<double> coef(n, 0.0);
  for (std::size_t i = 0; i < half; ++i) {
    coef[i] = -a[i];
    coef[n - 1 - i] = a[i];
  }
  const double ca = mean(coef);
  double xm = 0.0;
  for (double v : x) xm += v / range;
  xm /= an;
  double ssa = 0.0, ssx = 0.0, sax = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double da = coef[i] - ca;
    const double dx = x[i] / range - xm;
    ssa += da * da;
    ssx += dx * dx;
    sax += da * dx;
  }
  const double ssassx = std::sqrt(ssa * ssx);
  const double w1 = (ssassx - sax) * (ssassx + sax) / (ssa * ssx);
  const double w = 1.0 - w1;

  double pw;
  if (n == 3) {
    pw = 6.0 / M_PI * (std::asin(std::sqrt(w)) - std::asin(std::sqrt(0.75)));
  } else {
    double y = std::log(w1);
    const double lxx = std::log(an);
    double m, s;
    if (n <= 11) {
      const double gamma = poly(g, an);
      if (y >= gamma) {
        pw = 1e-19;
        return {"shapiro_wilk", w, pw, {n}};
      }
      y = -std::log(gamma - y);
      m = poly(c3, an);
      s = std::exp(poly(c4, an));
    } else {
      m = poly(c5, lxx);
      s = std::exp(poly(c6, lxx));
    }
    pw = normal_sf((y - m) / s);
  }
  return {"shapiro_wilk", w, std::clamp(pw, 0.0, 1.0), {n}};
}

TestResult mann_whitney_u(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw Error(Errc::EmptySample, "Mann-Whitney needs two non-empty samples");
  const std::size_t n1 = a.size(), n2 = b.size(), total = n1 + n2;
  std::vector<double> all(a.begin(), a.end());
  all.insert(all.end(), b.begin(), b.end());
  const auto ranks = midranks(all);
  const double r1 = std::accumulate(ranks.begin(), ranks.begin() + static_cast<long>(n1), 0.0);
  const double d1 = static_cast<double>(n1), d2 = static_cast<double>(n2);
  const double u1 = r1 - d1 * (d1 + 1.0) / 2.0;

  TestResult res{"mann_whitney_u", u1, 1.0, {n1, n2}};
  if (std::min(n1, n2) < 8) {
    // Permutation distribution of the smaller sample's rank sum, ranks doubled
    // so mid-ranks stay integral.
    const bool first_small = n1 <= n2;
    const std::size_t m = first_small ? n1 : n2;
    std::vector<long> r2(total);
    for (std::size_t i = 0; i < total; ++i) r2[i] = std::lround(2.0 * ranks[i]);
    std::vector<long> largest = r2;
    std::sort(largest.begin(), largest.end(), std::greater<>());
    const long max_sum = std::accumulate(largest.begin(), largest.begin() + static_cast<long>(m), 0L);
    long observed = 0;
    for (std::size_t i = 0; i < total; ++i) {
      const bool in_small = first_small ? i < n1 : i >= n1;
      if (in_small) observed += r2[i];
    }
    // ways[j][s]: number of j-subsets with doubled-rank sum s (as doubles).
    const auto width = static_cast<std::size_t>(max_sum + 1);
    std::vector<double> ways((m + 1) * width, 0.0);
    ways[0] = 1.0;
    for (std::size_t i = 0; i < total; ++i) {
      const auto r = static_cast<std::size_t>(r2[i]);
      for (std::size_t j = std::min(m, i + 1); j >= 1; --j) {
        double* dst = &ways[j * width];
        const double* src = &ways[(j - 1) * width];
        for (std::size_t s = width; s-- > r;) dst[s] += src[s - r];
      }
    }
    double count = 0.0, lower = 0.0, upper = 0.0;
    const double* row = &ways[m * width];
    for (std::size_t s = 0; s < width; ++s) {
      count += row[s];
      if (static_cast<long>(s) <= observed) lower += row[s];
      if (static_cast<long>(s) >= observed) upper += row[s];
    }
    res.p_value = std::min(1.0, 2.0 * std::min(lower, upper) / count);
    res.test_name = "mann_whitney_u_exact";
    return res;
  }

  const double mu = d1 * d2 / 2.0;
  const double nt = static_cast<double>(total);
  const double var = d1 * d2 / 12.0 * ((nt + 1.0) - tie_term(all) / (nt * (nt - 1.0)));
  if (var <= 0.0) return res;
  const double z = (std::abs(u1 - mu) - 0.5) / std::sqrt(var);
  res.p_value = std::clamp(2.0 * normal_sf(z), 0.0, 1.0);
  return res;
}

TestResult anova_oneway(std::span<const Sample> samples) {
  require_groups(samples, 2);
  const Anova a = anova_parts(samples);
  const double k = static_cast<double>(samples.size());
  const double df_within = static_cast<double>(a.total) - k;
  if (a.ss_within <= 0.0) throw Error(Errc::ZeroWithinVariance, "no within-group variance");
  const double f = (a.ss_between / (k - 1.0)) / (a.ss_within / df_within);
  return {"anova_oneway", f, std::clamp(special::f_sf(f, k - 1.0, df_within), 0.0, 1.0),
          sizes(samples)};
}

PairwiseMatrix tukey_hsd(std::span<const Sample> samples) {
  require_groups(samples, 2);
  const Anova a = anova_parts(samples);
  const int k = static_cast<int>(samples.size());
  const double df_within = static_cast<double>(a.total) - k;
  if (a.ss_within <= 0.0) throw Error(Errc::ZeroWithinVariance, "no within-group variance");
  const double msw = a.ss_within / df_within;

  PairwiseMatrix out = unit_matrix(samples);
  for (int i = 0; i < k; ++i) {
    for (int j = i + 1; j < k; ++j) {
      const double ni = static_cast<double>(samples[static_cast<std::size_t>(i)].values.size());
      const double nj = static_cast<double>(samples[static_cast<std::size_t>(j)].values.size());
      const double se = std::sqrt(msw / 2.0 * (1.0 / ni + 1.0 / nj));
      const double q = std::abs(a.means[static_cast<std::size_t>(i)] -
                                a.means[static_cast<std::size_t>(j)]) / se;
      const double p = special::studentized_range_sf(q, k, df_within);
      out.p_adjusted(i, j) = out.p_adjusted(j, i) = p;
    }
  }
  return out;
}

TestResult kruskal_wallis(std::span<const Sample> samples) {
  require_groups(samples, 1);
  const RankedGroups g = rank_groups(samples);
  if (g.total < 3) throw Error(Errc::InsufficientGroups, "Kruskal-Wallis needs N >= 3");
  const double nt = static_cast<double>(g.total);
  double sum = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    sum += static_cast<double>(samples[i].values.size()) * g.mean_rank[i] * g.mean_rank[i];
  }
  const double h_raw = 12.0 / (nt * (nt + 1.0)) * sum - 3.0 * (nt + 1.0);
  const double correction = 1.0 - g.tie / (nt * nt * nt - nt);
  TestResult res{"kruskal_wallis", 0.0, 1.0, sizes(samples)};
  if (correction <= 0.0) return res;
  res.statistic = std::max(0.0, h_raw / correction);
  res.p_value = std::clamp(special::chi2_sf(res.statistic, static_cast<double>(samples.size() - 1)),
                           0.0, 1.0);
  return res;
}

PairwiseMatrix dunn_bonferroni(std::span<const Sample> samples) {
  require_groups(samples, 1);
  const RankedGroups g = rank_groups(samples);
  if (g.total < 3) throw Error(Errc::InsufficientGroups, "Dunn's test needs N >= 3");
  const double nt = static_cast<double>(g.total);
  const double base = nt * (nt + 1.0) / 12.0 - g.tie / (12.0 * (nt - 1.0));
  const std::size_t k = samples.size();
  const double comparisons = static_cast<double>(k * (k - 1) / 2);

  PairwiseMatrix out = unit_matrix(samples);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i + 1; j < k; ++j) {
      const double var = base * (1.0 / static_cast<double>(samples[i].values.size()) +
                                 1.0 / static_cast<double>(samples[j].values.size()));
      double p = 1.0;
      if (var > 0.0) {
        const double z = (g.mean_rank[i] - g.mean_rank[j]) / std::sqrt(var);
        p = std::min(1.0, 2.0 * normal_sf(std::abs(z)) * comparisons);
      }
      const auto ii = static_cast<Eigen::Index>(i), jj = static_cast<Eigen::Index>(j);
      out.p_adjusted(ii, jj) = out.p_adjusted(jj, ii) = p;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

std::string LetterGroups::letters_string(std::size_t i) const {
  std::string s;
  for (int l : letters[i]) {
    if (l < 26) {
      s += static_cast<char>('A' + l);
    } else if (l < 52) {
      s += static_cast<char>('a' + (l - 26));
    } else {
      s += fmt::format("[{}]", l);
    }
  }
  return s;
}

std::map<std::string, std::string> LetterGroups::as_map() const {
  std::map<std::string, std::string> m;
  for (std::size_t i = 0; i < labels.size(); ++i) m[labels[i]] = letters_string(i);
  return m;
}

LetterGroups compact_letter_display(const PairwiseMatrix& m, std::span<const double> group_means,
                                    double alpha) {
  const std::size_t k = m.labels.size();
  if (group_means.size() != k) {
    throw Error(Errc::DimensionMismatch, "one mean per label required");
  }

  // Rank position of each group in descending-mean order.
  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (group_means[a] != group_means[b]) return group_means[a] > group_means[b];
    return m.labels[a] < m.labels[b];
  });
  std::vector<std::size_t> pos(k);
  for (std::size_t r = 0; r < k; ++r) pos[order[r]] = r;

  using Column = std::vector<char>;
  std::vector<Column> columns;
  if (k > 0) columns.emplace_back(k, 1);

  auto absorb = [&]() {
    std::vector<Column> kept;
    for (std::size_t c = 0; c < columns.size(); ++c) {
      bool redundant = false;
      for (std::size_t d = 0; d < columns.size() && !redundant; ++d) {
        if (c == d) continue;
        bool subset = true;
        for (std::size_t i = 0; i < k && subset; ++i) subset = !columns[c][i] || columns[d][i];
        // Equal columns: keep the first occurrence only.
        if (subset && (columns[c] != columns[d] || d < c)) redundant = true;
      }
      if (!redundant) kept.push_back(columns[c]);
    }
    columns = std::move(kept);
  };

  // Insert: split every column holding a significant pair. Pairs are visited
  // in rank order so the construction does not depend on input order.
  for (std::size_t ri = 0; ri < k; ++ri) {
    for (std::size_t rj = ri + 1; rj < k; ++rj) {
      const std::size_t i = order[ri], j = order[rj];
      if (m.p_adjusted(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) >= alpha) continue;
      std::vector<Column> next;
      for (auto& col : columns) {
        if (col[i] && col[j]) {
          Column without_i = col, without_j = col;
          without_i[i] = 0;
          without_j[j] = 0;
          next.push_back(std::move(without_i));
          next.push_back(std::move(without_j));
        } else {
          next.push_back(std::move(col));
        }
      }
      columns = std::move(next);
      absorb();
    }
  }

  // Letter order: columns sorted by the rank positions of their members.
  auto members = [&](const Column& col) {
    std::vector<std::size_t> r;
    for (std::size_t i = 0; i < k; ++i) {
      if (col[i]) r.push_back(pos[i]);
    }
    std::sort(r.begin(), r.end());
    return r;
  };
  std::sort(columns.begin(), columns.end(),
            [&](const Column& a, const Column& b) { return members(a) < members(b); });

  LetterGroups out;
  out.labels = m.labels;
  out.letters.assign(k, {});
  for (std::size_t c = 0; c < columns.size(); ++c) {
    for (std::size_t i = 0; i < k; ++i) {
      if (columns[c][i]) out.letters[i].push_back(static_cast<int>(c));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

PipelineResult branch_pipeline(std::span<const Sample> samples, double alpha) {
  if (samples.size() < 2) {
    throw Error(Errc::InsufficientGroups, fmt::format("{} group(s)", samples.size()));
  }
  PipelineResult r;
  for (const auto& s : samples) {
    r.means.push_back(mean(s.values));
    r.sds.push_back(sample_sd(s.values));
  }

  bool all_normal = true;
  for (const auto& s : samples) {
    try {
      const auto sw = shapiro_wilk(s.values);
      const bool normal = sw.p_value >= alpha;
      all_normal = all_normal && normal;
      r.trail.push_back({sw.test_name, s.label, sw.statistic, sw.p_value,
                         normal ? "normal" : "non-normal"});
    } catch (const Error& e) {
      if (e.code() != Errc::ConstantSample && e.code() != Errc::SampleTooSmall) throw;
      all_normal = false;
      r.trail.push_back({"shapiro_wilk", s.label, std::nullopt, std::nullopt,
                         std::string(errc_name(e.code())) + ": treated as non-normal"});
    }
  }

  const auto all_a = [&]() {
    LetterGroups g;
    for (const auto& s : samples) {
      g.labels.push_back(s.label);
      g.letters.push_back({0});
    }
    return g;
  };

  if (all_normal) {
    r.branch = Branch::Parametric;
    r.omnibus = anova_oneway(samples);
  } else {
    r.branch = Branch::Nonparametric;
    r.omnibus = kruskal_wallis(samples);
  }
  const bool significant = r.omnibus.p_value < alpha;
  r.trail.push_back({r.omnibus.test_name, "", r.omnibus.statistic, r.omnibus.p_value,
                     significant ? "significant" : "not significant"});

  if (!significant) {
    r.letters = all_a();
    r.trail.push_back({"letters", "", std::nullopt, std::nullopt, "omnibus not significant: all A"});
    return r;
  }
  r.posthoc = r.branch == Branch::Parametric ? tukey_hsd(samples) : dunn_bonferroni(samples);
  r.trail.push_back({r.branch == Branch::Parametric ? "tukey_hsd" : "dunn_bonferroni", "",
                     std::nullopt, std::nullopt, ""});
  r.letters = compact_letter_display(*r.posthoc, r.means, alpha);
  r.trail.push_back({"letters", "", std::nullopt, std::nullopt, "compact letter display"});
  return r;
}

nlohmann::json to_json(const TestResult& r) {
  return {{"test", r.test_name}, {"statistic", r.statistic}, {"p_value", r.p_value}, {"n", r.n}};
}

nlohmann::json to_json(const PairwiseMatrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.p_adjusted.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.p_adjusted.cols(); ++j) row.push_back(m.p_adjusted(i, j));
    rows.push_back(std::move(row));
  }
  return {{"labels", m.labels}, {"p_adjusted", std::move(rows)}};
}

nlohmann::json to_json(const PipelineResult& r, std::span<const Sample> samples, double alpha) {
  nlohmann::json groups = nlohmann::json::array();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    groups.push_back({{"label", samples[i].label},
                      {"n", samples[i].values.size()},
                      {"mean", r.means[i]},
                      {"sd", r.sds[i]},
                      {"letters", r.letters.letters_string(i)}});
  }
  nlohmann::json trail = nlohmann::json::array();
  for (const auto& t : r.trail) {
    nlohmann::json e = {{"test", t.test}};
    if (!t.group.empty()) e["group"] = t.group;
    if (t.statistic) e["statistic"] = *t.statistic;
    if (t.p_value) e["p_value"] = *t.p_value;
    if (!t.note.empty()) e["note"] = t.note;
    trail.push_back(std::move(e));
  }
  nlohmann::json j = {{"alpha", alpha},
                      {"branch", r.branch == Branch::Parametric ? "parametric" : "nonparametric"},
                      {"groups", std::move(groups)},
                      {"omnibus", to_json(r.omnibus)},
                      {"trail", std::move(trail)}};
  j["posthoc"] = r.posthoc ? to_json(*r.posthoc) : nlohmann::json(nullptr);
  return j;
}

}  // namespace synmix::stats
