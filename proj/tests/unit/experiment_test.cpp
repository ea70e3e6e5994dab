#include <gtest/gtest.h>

#include "support.hpp"
#include "synmix/error.hpp"
#include "synmix/experiment.hpp"
#include "synmix/log.hpp"
#include "synmix/manifest.hpp"
#include "synmix/report.hpp"

using namespace synmix;
namespace fs = std::filesystem;
using synmix::testing::TempDir;

namespace {

Errc code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return Errc::IoFailure;
}

nlohmann::json small_config() {
  return {{"dataset_root", (synmix::testing::fixtures_dir() / "dataset").string()},
          {"class_count", 3},
          {"split", {{"train", 0.7}, {"val", 0.15}, {"test", 0.15}, {"seed", 3}}},
          {"p_values", {0.3, 0.6}},
          {"replicates", 3},
          {"seed", 5},
          {"workers", 2},
          {"models", {{{"name", "A"}, {"detector", "stub"}}, {{"name", "B"}, {"detector", "stub"}}}}};
}

std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), root).string();
    if (rel.rfind("adapter_runs", 0) == 0) continue;
    files[rel] = read_text_file(e.path());
  }
  return files;
}

class ExperimentTest : public ::testing::Test {
 protected:
  void SetUp() override {
    set_adapter_bindir(synmix::testing::bin_dir());
    set_quiet(true);
  }
  void TearDown() override { set_quiet(false); }
};

}  // namespace

TEST_F(ExperimentTest, RunsAllStagesWithStubDetector) {
  TempDir tmp("exp");
  const auto cfg = ExperimentConfig::from_json(small_config(), tmp.path());
  const auto summary = run_experiment(cfg, tmp / "out");
  EXPECT_EQ(summary.completed,
            (std::vector<std::string>{"split", "plans", "detections", "eval", "stats", "report"}));
  const auto out = tmp / "out";
  for (const char* f : {"config.json", "split/train.json", "split/test.json", "plans/index.json",
                        "eval/metrics.csv", "stats/stat_report.json", "report/mAP50.md",
                        "report/mAP50_95.csv", "report/mAP50.tex", "report/report.md",
                        "report/metadata.json", "detections/A/p0.30_r02.txt"}) {
    EXPECT_TRUE(fs::exists(out / f)) << f;
  }
  const auto index = read_json_file(out / "plans" / "index.json");
  EXPECT_EQ(index["plans"].size(), 1U + 2U * 3U);

  const auto samples =
      report::parse_metric_samples_csv(read_text_file(out / "eval" / "metrics.csv"));
  const auto agg = report::aggregate(samples, "mAP50");
  ASSERT_EQ(agg.size(), 2U * 3U);
  // The baseline is trained once and repeated for every replicate id.
  EXPECT_EQ(agg.at({"A", "Real data only"}).n, 3U);
  EXPECT_DOUBLE_EQ(agg.at({"A", "Real data only"}).sd, 0.0);

  const auto stats = read_json_file(out / "stats" / "stat_report.json");
  EXPECT_TRUE(stats["models"].contains("A"));
  EXPECT_TRUE(stats["models"]["A"].contains("mAP50"));
  const auto table = report::parse_table_csv(read_text_file(out / "report" / "mAP50.csv"));
  EXPECT_EQ(table.rows,
            (std::vector<std::string>{"Real data only", "Syn30 Real70", "Syn60 Real40"}));
  for (std::size_t c = 0; c < table.columns.size(); ++c) {
    int bold = 0;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
      bold += table.cells[r][c].bold;
      EXPECT_FALSE(table.cells[r][c].letters.empty());
    }
    EXPECT_EQ(bold, 1);
  }
}

TEST_F(ExperimentTest, PlansHoldNoHeldOutImages) {
  TempDir tmp("exp");
  const auto cfg = ExperimentConfig::from_json(small_config(), tmp.path());
  run_experiment(cfg, tmp / "out");
  const auto split = read_json_file(tmp / "out" / "split" / "split.json");
  std::set<std::string> held;
  for (const char* part : {"val", "test"}) {
    for (const auto& id : split[part]) held.insert(id.get<std::string>());
  }
  const auto index = read_json_file(tmp / "out" / "plans" / "index.json");
  for (const auto& p : index["plans"]) {
    const auto m = Manifest::load(tmp / "out" / "plans" / (p["key"].get<std::string>() + ".json"));
    EXPECT_EQ(m.images.size(), p["n_training"].get<std::size_t>());
    std::size_t syn = 0;
    for (const auto& e : m.images) {
      EXPECT_FALSE(held.count(e.image.id)) << e.image.id;
      syn += e.image.provenance == Provenance::Synthetic;
    }
    EXPECT_EQ(syn, p["n_synthetic"].get<std::size_t>());
  }
}

TEST_F(ExperimentTest, DeterministicAcrossRunsAndWorkerCounts) {
  TempDir tmp("exp");
  auto j = small_config();
  run_experiment(ExperimentConfig::from_json(j, tmp.path()), tmp / "a");
  run_experiment(ExperimentConfig::from_json(j, tmp.path()), tmp / "b");
  auto ta = tree(tmp / "a");
  auto tb = tree(tmp / "b");
  EXPECT_EQ(ta, tb);
  j["workers"] = 1;
  run_experiment(ExperimentConfig::from_json(j, tmp.path()), tmp / "c");
  auto tc = tree(tmp / "c");
  ta.erase("config.json");
  tc.erase("config.json");
  EXPECT_EQ(ta, tc);
}

TEST_F(ExperimentTest, RefusesNonEmptyDirectoryWithoutResume) {
  TempDir tmp("exp");
  const auto cfg = ExperimentConfig::from_json(small_config(), tmp.path());
  write_text_file(tmp / "out" / "stray.txt", "x");
  EXPECT_EQ(code_of([&] { run_experiment(cfg, tmp / "out"); }), Errc::ConfigInvalid);
}

TEST_F(ExperimentTest, ResumeRedoesOnlyUnfinishedStages) {
  TempDir tmp("exp");
  const auto cfg = ExperimentConfig::from_json(small_config(), tmp.path());
  run_experiment(cfg, tmp / "out");
  const auto before = tree(tmp / "out");

  // Simulate an interruption during the report stage.
  fs::remove(tmp / "out" / ".stages" / "report.done");
  write_text_file(tmp / "out" / "report" / "partial.md", "half");
  const auto summary = run_experiment(cfg, tmp / "out", {.resume = true});
  EXPECT_EQ(summary.completed, (std::vector<std::string>{"report"}));
  EXPECT_EQ(summary.skipped.size(), 5U);
  EXPECT_FALSE(fs::exists(tmp / "out" / "report" / "partial.md"));
  EXPECT_EQ(tree(tmp / "out"), before);

  const auto again = run_experiment(cfg, tmp / "out", {.resume = true});
  EXPECT_TRUE(again.completed.empty());
}

TEST_F(ExperimentTest, ResumeRejectsChangedConfig) {
  TempDir tmp("exp");
  run_experiment(ExperimentConfig::from_json(small_config(), tmp.path()), tmp / "out");
  auto j = small_config();
  j["seed"] = 6;
  EXPECT_EQ(code_of([&] {
              run_experiment(ExperimentConfig::from_json(j, tmp.path()), tmp / "out",
                             {.resume = true});
            }),
            Errc::ConfigInvalid);
}

TEST_F(ExperimentTest, SingleCombinationSkipsStatsWithNotice) {
  TempDir tmp("exp");
  auto j = small_config();
  j["p_values"] = {0.0};
  const auto summary = run_experiment(ExperimentConfig::from_json(j, tmp.path()), tmp / "out");
  ASSERT_EQ(summary.notices.size(), 1U);
  EXPECT_NE(summary.notices[0].find("only one dataset combination"), std::string::npos);
  const auto stats = read_json_file(tmp / "out" / "stats" / "stat_report.json");
  EXPECT_TRUE(stats.contains("skipped"));
  EXPECT_TRUE(fs::exists(tmp / "out" / "report" / "mAP50.md"));
}

TEST_F(ExperimentTest, PerReplicateBaselineAndNone) {
  TempDir tmp("exp");
  auto j = small_config();
  j["baseline"] = "per-replicate";
  j["models"] = {{{"name", "A"}, {"detector", "stub"}}};
  run_experiment(ExperimentConfig::from_json(j, tmp.path()), tmp / "per");
  EXPECT_EQ(read_json_file(tmp / "per" / "plans" / "index.json")["plans"].size(), 3U * 3U);
  j["baseline"] = "none";
  run_experiment(ExperimentConfig::from_json(j, tmp.path()), tmp / "none");
  const auto index = read_json_file(tmp / "none" / "plans" / "index.json");
  EXPECT_EQ(index["plans"].size(), 2U * 3U);
  for (const auto& p : index["plans"]) EXPECT_GT(p["p"].get<double>(), 0.0);
}

TEST_F(ExperimentTest, OfflineDetectionsMustExist) {
  TempDir tmp("exp");
  auto j = small_config();
  j["models"] = {"A"};
  j["offline_detections"] = "nowhere";
  const auto cfg = ExperimentConfig::from_json(j, tmp.path());
  EXPECT_EQ(code_of([&] { run_experiment(cfg, tmp / "out"); }), Errc::IoFailure);
}

TEST_F(ExperimentTest, AdapterFailureSurfaces) {
  TempDir tmp("exp");
  auto j = small_config();
  j["models"] = {{{"name", "A"},
                  {"detector", {{"role", "detector"}, {"command", {"sh", "-c", "exit 7"}}}}}};
  const auto cfg = ExperimentConfig::from_json(j, tmp.path());
  EXPECT_EQ(code_of([&] { run_experiment(cfg, tmp / "out"); }), Errc::AdapterFailure);
  EXPECT_FALSE(fs::exists(tmp / "out" / ".stages" / "detections.done"));
  EXPECT_TRUE(fs::exists(tmp / "out" / ".stages" / "plans.done"));
}

TEST_F(ExperimentTest, ConfigValidation) {
  TempDir tmp("exp");
  auto bad = [&](const std::function<void(nlohmann::json&)>& edit) {
    auto j = small_config();
    edit(j);
    return code_of([&] { ExperimentConfig::from_json(j, tmp.path()); });
  };
  EXPECT_EQ(bad([](auto& j) { j["colour"] = "red"; }), Errc::ConfigInvalid);
  EXPECT_EQ(bad([](auto& j) { j["p_values"] = {0.5, 1.0}; }), Errc::ConfigInvalid);
  EXPECT_EQ(bad([](auto& j) { j["models"] = nlohmann::json::array(); }), Errc::ConfigInvalid);
  EXPECT_EQ(bad([](auto& j) { j["models"] = {"A"}; }), Errc::ConfigInvalid);
  EXPECT_EQ(bad([](auto& j) { j["models"] = {"A", "A"}; j["offline_detections"] = "d"; }),
            Errc::ConfigInvalid);
  EXPECT_EQ(bad([](auto& j) { j["models"] = {"../x"}; j["offline_detections"] = "d"; }),
            Errc::ConfigInvalid);
  EXPECT_EQ(bad([](auto& j) { j["baseline"] = "twice"; }), Errc::ConfigInvalid);
  EXPECT_EQ(bad([](auto& j) { j["split"]["train"] = 0.9; }), Errc::ConfigInvalid);
  EXPECT_EQ(bad([](auto& j) { j["replicates"] = 0; }), Errc::ConfigInvalid);
  EXPECT_EQ(bad([](auto& j) { j["alpha"] = 0; }), Errc::ConfigInvalid);
  EXPECT_EQ(bad([](auto& j) { j["class_count"] = "three"; }), Errc::ConfigInvalid);
  EXPECT_EQ(code_of([&] { ExperimentConfig::load(tmp / "missing.json"); }), Errc::ConfigInvalid);
}

TEST_F(ExperimentTest, StagesInOrder) {
  EXPECT_EQ(experiment_stages(), (std::vector<std::string>{"split", "plans", "detections", "eval",
                                                           "stats", "report", "iqa"}));
}
