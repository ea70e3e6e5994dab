#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

namespace synmix::stats {

/// One group of replicate values, e.g. label "Syn10 Real90".
struct Sample {
  std::string label;
  std::vector<double> values;
};

struct TestResult {
  std::string test_name;
  double statistic = 0.0;
  double p_value = 1.0;
  std::vector<std::size_t> n;
};

/// Symmetric matrix of adjusted p-values with unit diagonal.
struct PairwiseMatrix {
  std::vector<std::string> labels;
  Eigen::MatrixXd p_adjusted;
};

/// Letter indices per label (0 -> "A"). Rendering via letters_string().
struct LetterGroups {
  std::vector<std::string> labels;
  std::vector<std::vector<int>> letters;

  std::string letters_string(std::size_t i) const;
  std::map<std::string, std::string> as_map() const;
};

double mean(std::span<const double> v);
/// Sample standard deviation (n - 1); 0 for a single value.
double sample_sd(std::span<const double> v);

/// Mid-ranks (1-based) of the concatenated values.
std::vector<double> midranks(std::span<const double> values);

/// Royston's AS R94 approximation, 3 <= n <= 5000.
TestResult shapiro_wilk(std::span<const double> values);

/// Two-sided. Exact permutation distribution of the mid-rank sum when
/// min(n1, n2) < 8, otherwise the normal approximation with tie and
/// continuity corrections. The statistic is U of the first sample.
TestResult mann_whitney_u(std::span<const double> a, std::span<const double> b);

TestResult anova_oneway(std::span<const Sample> samples);

/// Tukey-Kramer adjusted p-values from the studentized range distribution.
PairwiseMatrix tukey_hsd(std::span<const Sample> samples);

/// H with tie correction, chi-square reference. All values tied gives H = 0, p = 1.
TestResult kruskal_wallis(std::span<const Sample> samples);

/// Dunn's z on mean ranks with tie-corrected variance, Bonferroni (x m, capped at 1).
PairwiseMatrix dunn_bonferroni(std::span<const Sample> samples);

/// Insert-and-absorb letter display. Two labels share a letter iff their
/// adjusted p >= alpha. Letters follow descending group means; ties in the
/// mean fall back to the label.
LetterGroups compact_letter_display(const PairwiseMatrix& m, std::span<const double> group_means,
                                    double alpha = 0.05);

/// One step of the significance pipeline as recorded in a report.
struct TrailEntry {
  std::string test;
  std::string group;  // empty for omnibus / post-hoc entries
  std::optional<double> statistic;
  std::optional<double> p_value;
  std::string note;
};

enum class Branch { Parametric, Nonparametric };

struct PipelineResult {
  Branch branch = Branch::Nonparametric;
  std::vector<TrailEntry> trail;
  TestResult omnibus;
  std::optional<PairwiseMatrix> posthoc;
  LetterGroups letters;
  std::vector<double> means;
  std::vector<double> sds;
};

/// Normality per group decides ANOVA + Tukey or Kruskal-Wallis + Dunn;
/// a non-significant omnibus gives every group "A".
PipelineResult branch_pipeline(std::span<const Sample> samples, double alpha = 0.05);

nlohmann::json to_json(const PipelineResult& r, std::span<const Sample> samples, double alpha);
nlohmann::json to_json(const TestResult& r);
nlohmann::json to_json(const PairwiseMatrix& m);

}  // namespace synmix::stats
