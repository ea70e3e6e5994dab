#include <chrono>
#include <functional>
#include <iostream>
#include <set>

#include <fmt/core.h>
#include <nlohmann/json.hpp>

#include "support.hpp"
#include "synmix/detect.hpp"
#include "synmix/experiment.hpp"
#include "synmix/image.hpp"
#include "synmix/iqa.hpp"
#include "synmix/log.hpp"
#include "synmix/manifest.hpp"
#include "synmix/report.hpp"
#include "synmix/sampler.hpp"
#include "synmix/stats.hpp"

using namespace synmix;
using namespace synmix::iqa;
namespace fs = std::filesystem;
using synmix::testing::TempDir;

namespace {

struct Outcome {
  bool ok = true;
  std::string detail;

  void check(bool cond, const std::string& what) {
    if (cond) return;
    if (ok) detail = what;
    ok = false;
  }
};

struct Criterion {
  std::string name;
  double budget_seconds;
  std::function<Outcome()> body;
};

// --- detection ---------------------------------------------------------------

Outcome map_oracle() {
  Outcome o;
  double worst = 0.0;
  for (std::uint64_t s = 0; s < 200; ++s) {
    const auto scene = synmix::testing::random_scene(50000 + s);
    const auto got = map_scores(scene.dets, scene.truths);
    const auto want = synmix::testing::oracle_map(scene.dets, scene.truths);
    worst = std::max({worst, std::abs(got.map50 - want.map50),
                      std::abs(got.map50_95 - want.map50_95)});
  }
  o.check(worst <= 1e-9, fmt::format("max deviation {:.3g}", worst));
  if (o.ok) o.detail = fmt::format("200 scenes, max deviation {:.3g}", worst);
  return o;
}

// --- sampler -----------------------------------------------------------------

std::string plans_fingerprint(const std::vector<MixturePlan>& plans) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& p : plans) {
    j.push_back({{"key", p.key()},
                 {"seed", p.seed},
                 {"real", p.real_ids},
                 {"synthetic", p.synthetic_ids}});
  }
  return j.dump();
}

Outcome mixture_protocol() {
  Outcome o;
  constexpr int kTraining = 1508;
  std::vector<std::string> real, pool;
  for (int i = 0; i < 2155; ++i) real.push_back(fmt::format("real-{:05d}", i));
  for (int i = 0; i < 1400; ++i) pool.push_back(fmt::format("syn-{:05d}", i));
  const std::vector<double> ps{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  std::size_t checked = 0;
  for (std::uint64_t base : {1ULL, 7ULL, 42ULL, 1234ULL, 99991ULL}) {
    SplitSpec spec;
    spec.seed = base;
    const auto split = split_ids(real, spec);
    std::set<std::string> held(split.val.begin(), split.val.end());
    held.insert(split.test.begin(), split.test.end());

    MixtureRequest req;
    req.real_train_ids = split.train;
    req.synthetic_pool_ids = pool;
    req.p_values = ps;
    req.replicates = 10;
    req.base_seed = base;
    req.n_training = kTraining;
    const auto plans = build_mixture_plans(req);
    o.check(plans.size() == ps.size() * 10, "plan count");
    for (const auto& p : plans) {
      const auto want = static_cast<std::size_t>(std::llround(p.p * kTraining));
      o.check(p.synthetic_ids.size() == want, fmt::format("|synthetic| at p={}", p.p));
      o.check(p.synthetic_ids.size() + p.real_ids.size() == kTraining,
              fmt::format("total at p={}", p.p));
      const std::set<std::string> uniq_real(p.real_ids.begin(), p.real_ids.end());
      const std::set<std::string> uniq_syn(p.synthetic_ids.begin(), p.synthetic_ids.end());
      o.check(uniq_real.size() == p.real_ids.size() && uniq_syn.size() == p.synthetic_ids.size(),
              "duplicate ids");
      for (const auto& id : p.real_ids) o.check(!held.count(id), "val/test contamination " + id);
      for (const auto& id : p.synthetic_ids) o.check(id.rfind("syn-", 0) == 0, "foreign id");
      ++checked;
    }
    const auto again = build_mixture_plans(req);
    o.check(plans_fingerprint(plans) == plans_fingerprint(again), "rerun differs");
  }
  if (o.ok) o.detail = fmt::format("{} plans, n_training {}", checked, kTraining);
  return o;
}

// --- statistics --------------------------------------------------------------

std::vector<stats::Sample> groups_of(const nlohmann::json& g) {
  std::vector<stats::Sample> out;
  for (std::size_t i = 0; i < g.size(); ++i) {
    out.push_back({fmt::format("g{}", i), g[i].get<std::vector<double>>()});
  }
  return out;
}

double matrix_deviation(const stats::PairwiseMatrix& m, const nlohmann::json& p) {
  double worst = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    for (std::size_t j = 0; j < p.size(); ++j) {
      if (i == j) continue;
      worst = std::max(worst, std::abs(m.p_adjusted(static_cast<Eigen::Index>(i),
                                                    static_cast<Eigen::Index>(j)) -
                                       p[i][j].get<double>()));
    }
  }
  return worst;
}

Outcome stats_oracle() {
  Outcome o;
  const auto ref =
      read_json_file(synmix::testing::source_dir() / "tests" / "oracles" / "stats_reference.json");
  double stat_dev = 0.0, p_dev = 0.0;
  std::size_t cases = 0;
  auto track = [&](double stat, double want_stat, double p, double want_p) {
    stat_dev = std::max(stat_dev, std::abs(stat - want_stat));
    p_dev = std::max(p_dev, std::abs(p - want_p));
    ++cases;
  };
  for (const auto& c : ref["shapiro_wilk"]) {
    const auto r = stats::shapiro_wilk(c["x"].get<std::vector<double>>());
    track(r.statistic, c["w"], r.p_value, c["p"]);
  }
  for (const auto& c : ref["mann_whitney_u"]) {
    const auto r = stats::mann_whitney_u(c["a"].get<std::vector<double>>(),
                                         c["b"].get<std::vector<double>>());
    track(r.statistic, c["u"], r.p_value, c["p"]);
  }
  for (const auto& c : ref["anova"]) {
    const auto r = stats::anova_oneway(groups_of(c["groups"]));
    track(r.statistic, c["f"], r.p_value, c["p"]);
  }
  for (const auto& c : ref["kruskal_wallis"]) {
    const auto r = stats::kruskal_wallis(groups_of(c["groups"]));
    track(r.statistic, c["h"], r.p_value, c["p"]);
  }
  for (const auto& c : ref["tukey_hsd"]) {
    p_dev = std::max(p_dev, matrix_deviation(stats::tukey_hsd(groups_of(c["groups"])), c["p"]));
    ++cases;
  }
  for (const auto& c : ref["dunn"]) {
    p_dev =
        std::max(p_dev, matrix_deviation(stats::dunn_bonferroni(groups_of(c["groups"])), c["p"]));
    ++cases;
  }
  o.check(cases == 300, fmt::format("{} reference cases", cases));
  o.check(stat_dev <= 1e-6, fmt::format("statistic deviation {:.3g}", stat_dev));
  o.check(p_dev <= 1e-3, fmt::format("p deviation {:.3g}", p_dev));

  Rng rng(20240607);
  constexpr int kTrials = 1000;
  std::map<std::string, int> hits;
  auto any_below = [](const stats::PairwiseMatrix& m) {
    return (m.p_adjusted.array() < 0.05).any();
  };
  for (int t = 0; t < kTrials; ++t) {
    std::vector<stats::Sample> g(3);
    for (std::size_t i = 0; i < g.size(); ++i) {
      g[i].label = fmt::format("g{}", i);
      for (int k = 0; k < 15; ++k) g[i].values.push_back(rng.normal());
    }
    std::vector<double> small;
    for (int k = 0; k < 6; ++k) small.push_back(rng.normal());
    hits["shapiro_wilk"] += stats::shapiro_wilk(g[0].values).p_value < 0.05;
    hits["mann_whitney_u"] += stats::mann_whitney_u(g[0].values, g[1].values).p_value < 0.05;
    hits["mann_whitney_u_exact"] +=
        stats::mann_whitney_u(small, std::span(g[2].values).first(7)).p_value < 0.05;
    hits["anova_oneway"] += stats::anova_oneway(g).p_value < 0.05;
    hits["kruskal_wallis"] += stats::kruskal_wallis(g).p_value < 0.05;
    hits["tukey_hsd"] += any_below(stats::tukey_hsd(g));
    hits["dunn_bonferroni"] += any_below(stats::dunn_bonferroni(g));
  }
  std::string rates;
  for (const auto& [name, n] : hits) {
    const double rate = static_cast<double>(n) / kTrials;
    o.check(rate >= 0.03 && rate <= 0.07, fmt::format("{} null rejection rate {:.3f}", name, rate));
    rates += fmt::format(" {}={:.3f}", name, rate);
  }
  if (o.ok) {
    o.detail = fmt::format("{} cases, dev stat {:.2g} p {:.2g}; null rates{}", cases, stat_dev,
                           p_dev, rates);
  }
  return o;
}

Outcome cld_soundness() {
  Outcome o;
  Rng rng(424242);
  for (int t = 0; t < 500; ++t) {
    const std::size_t k = 2 + static_cast<std::size_t>(rng.below(9));
    const auto m = synmix::testing::random_significance(k, rng.uniform(), rng);
    std::vector<double> means;
    for (std::size_t i = 0; i < k; ++i) means.push_back(rng.uniform());
    const auto g = stats::compact_letter_display(m, means, 0.05);
    o.check(synmix::testing::cld_sound(g, m, 0.05), fmt::format("matrix {} unsound", t));
  }
  const auto m = synmix::testing::two_block_significance();
  std::vector<double> means;
  for (int i = 0; i < 10; ++i) means.push_back(0.9 - 0.01 * i);
  const auto g = stats::compact_letter_display(m, means, 0.05);
  std::string pattern;
  for (std::size_t i = 0; i < 10; ++i) pattern += (i ? "," : "") + g.letters_string(i);
  o.check(pattern == "A,A,A,A,B,B,B,B,B,B", "pattern " + pattern);
  if (o.ok) o.detail = "500 matrices; pattern " + pattern;
  return o;
}

// --- report ------------------------------------------------------------------

Outcome table_fixture() {
  Outcome o;
  // Four Syn10 replicates fall below the baseline, so the two groups overlap.
  std::vector<double> z{-1, -1, -1, -1, 2.0 / 3, 2.0 / 3, 2.0 / 3, 2.0 / 3, 2.0 / 3, 2.0 / 3};
  const double z_sd = stats::sample_sd(z);
  std::vector<report::MetricSample> s;
  for (int r = 0; r < 10; ++r) {
    s.push_back({"YOLOv9s", "Real data only", r, "mAP50", 0.876});
    s.push_back({"YOLOv9s", "Syn10 Real90", r, "mAP50", 0.883 + 0.007 * z[r] / z_sd});
  }
  stats::Sample base{"Real data only", {}}, syn{"Syn10 Real90", {}};
  for (const auto& x : s) (x.dataset_combination == base.label ? base : syn).values.push_back(x.value);
  const std::vector<stats::Sample> groups{base, syn};
  const auto pipe = stats::branch_pipeline(groups, 0.05);
  report::LetterMap letters;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    letters["YOLOv9s"][groups[i].label] = pipe.letters.letters_string(i);
  }
  const auto t = report::build_table(report::aggregate(s, "mAP50"), "mAP50",
                                     {"Real data only", "Syn10 Real90"}, {"YOLOv9s"}, letters);
  const auto md = report::render_table(t, report::Format::Markdown);
  const std::string pm = "\xC2\xB1";
  o.check(md.find("| Real data only | 0.876 " + pm + " 0.000^A |") != std::string::npos,
          "baseline cell");
  o.check(md.find("| Syn10 Real90 | **0.883** " + pm + " 0.007^A |") != std::string::npos,
          "Syn10 cell");
  const auto tex = report::render_table(t, report::Format::Latex);
  o.check(tex.find("\\textbf{0.883} " + pm + " 0.007\\textsuperscript{A}") != std::string::npos,
          "latex cell");
  if (o.ok) o.detail = "0.876 " + pm + " 0.000^A, **0.883** " + pm + " 0.007^A";
  return o;
}

// --- IQA ---------------------------------------------------------------------

GrayImage noise_image(std::uint64_t seed, int w, int h) {
  Rng rng(seed);
  GrayImage img(h, w);
  for (Eigen::Index i = 0; i < img.size(); ++i) img(i) = rng.uniform();
  return img;
}

Outcome iqa_properties() {
  Outcome o;
  double ggd_dev = 0.0, aggd_dev = 0.0;
  std::uint64_t seed = 1;
  for (double shape : {0.5, 1.0, 2.0, 4.0}) {
    const auto g = synmix::testing::ggd_samples(shape, 1.0, 1000000, seed++);
    ggd_dev = std::max(ggd_dev, std::abs(estimate_ggd(g).shape - shape));
    const auto a = synmix::testing::aggd_samples(shape, 0.7, 1.3, 1000000, seed++);
    aggd_dev = std::max(aggd_dev, std::abs(estimate_aggd(a).shape - shape));
  }
  o.check(ggd_dev <= 0.05, fmt::format("GGD shape error {:.3f}", ggd_dev));
  o.check(aggd_dev <= 0.05, fmt::format("AGGD shape error {:.3f}", aggd_dev));

  const GrayImage scene = render_scene(12, 96, 80);
  const auto f = brisque_features(scene);
  const GrayImage flipped = scene.rowwise().reverse();
  const auto g = brisque_features(flipped);
  FeatureVector expected = f;
  for (int s = 0; s < 2; ++s) {
    const int b = s * kFeaturesPerScale;
    for (int k = 0; k < 4; ++k) {
      expected(b + 10 + k) = f(b + 14 + k);
      expected(b + 14 + k) = f(b + 10 + k);
    }
  }
  const double flip_dev = (g - expected).cwiseAbs().maxCoeff();
  o.check(f.size() == 36, "feature length");
  o.check(flip_dev <= 1e-6, fmt::format("flip deviation {:.3g}", flip_dev));

  const auto niqe = NiqeModel::load(synmix::testing::data_dir() / "niqe_reference.json");
  std::vector<double> corpus_scores, noise_scores;
  for (int i = 0; i < 20; ++i) {
    corpus_scores.push_back(niqe_score(render_scene(9000 + i, 384, 384), niqe));
    noise_scores.push_back(niqe_score(noise_image(7000 + i, 384, 384), niqe));
  }
  const auto mw = stats::mann_whitney_u(corpus_scores, noise_scores);
  const double corpus_mean = stats::mean(corpus_scores), noise_mean = stats::mean(noise_scores);
  o.check(mw.p_value < 0.05 && corpus_mean < noise_mean,
          fmt::format("NIQE corpus {:.1f} vs noise {:.1f}, p {:.3g}", corpus_mean, noise_mean,
                      mw.p_value));

  const auto brisque = BrisqueModel::load(synmix::testing::data_dir() / "brisque_reference.json");
  const std::vector<double> levels{0.0, 0.01, 0.02, 0.05, 0.1, 0.2};
  int worst_steps = 5;
  for (int i = 0; i < 10; ++i) {
    const GrayImage img = render_scene(3000 + i, 128, 128);
    std::vector<double> scores;
    for (std::size_t l = 0; l < levels.size(); ++l) {
      const GrayImage x = levels[l] > 0 ? add_gaussian_noise(img, levels[l], 100 + i) : img;
      scores.push_back(brisque_score(brisque_features(x), brisque));
    }
    int ok_steps = 0;
    for (std::size_t l = 1; l < scores.size(); ++l) ok_steps += scores[l] >= scores[l - 1];
    worst_steps = std::min(worst_steps, ok_steps);
  }
  o.check(worst_steps >= 4, fmt::format("BRISQUE monotone in only {} of 5 steps", worst_steps));
  if (o.ok) {
    o.detail = fmt::format(
        "shape err GGD {:.3f} AGGD {:.3f}; flip {:.2g}; NIQE {:.1f} < {:.1f} (p {:.2g}); "
        "BRISQUE >= {}/5 steps",
        ggd_dev, aggd_dev, flip_dev, corpus_mean, noise_mean, mw.p_value, worst_steps);
  }
  return o;
}

// --- end to end --------------------------------------------------------------

std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), root).string()] = read_text_file(e.path());
  }
  return files;
}

Outcome end_to_end() {
  Outcome o;
  TempDir tmp("acceptance");
  const auto cfg = ExperimentConfig::load(synmix::testing::fixtures_dir() / "experiment.json");
  run_experiment(cfg, tmp / "a");
  run_experiment(cfg, tmp / "b");
  for (const char* f :
       {"split/train.json", "plans/index.json", "eval/metrics.csv", "stats/stat_report.json",
        "report/mAP50.md", "report/mAP50_95.tex", "report/mAP50.csv", "iqa/scores.csv"}) {
    o.check(fs::exists(tmp / "a" / f), std::string("missing ") + f);
  }
  const auto ta = tree(tmp / "a");
  const auto tb = tree(tmp / "b");
  o.check(ta == tb, "runs differ");
  if (o.ok) o.detail = fmt::format("{} files byte-identical across runs", ta.size());
  return o;
}

}  // namespace

int main() {
  set_adapter_bindir(synmix::testing::bin_dir());
  set_quiet(true);
  const std::vector<Criterion> criteria{
      {"mAP oracle equivalence", 10, map_oracle},
      {"Mixture protocol", 60, mixture_protocol},
      {"Statistics oracle suite", 120, stats_oracle},
      {"CLD soundness", 60, cld_soundness},
      {"Table fixture reproduction", 10, table_fixture},
      {"IQA properties", 180, iqa_properties},
      {"End-to-end offline run", 30, end_to_end},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.body();
    } catch (const std::exception& e) {
      out.ok = false;
      out.detail = std::string("exception: ") + e.what();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (out.ok && secs > c.budget_seconds) {
      out.ok = false;
      out.detail = fmt::format("over time budget of {} s", c.budget_seconds);
    }
    failures += !out.ok;
    std::cout << fmt::format("{} {} ({:.2f} s): {}\n", out.ok ? "PASS" : "FAIL", c.name, secs,
                             out.detail);
  }
  return failures == 0 ? 0 : 1;
}
