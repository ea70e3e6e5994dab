#include <gtest/gtest.h>
#include <sys/wait.h>

#include "support.hpp"
#include "synmix/manifest.hpp"

using namespace synmix;
namespace fs = std::filesystem;
using synmix::testing::TempDir;

namespace {

int run_cli(const std::string& args) {
  const auto cmd = (synmix::testing::bin_dir() / "synmix").string() + " -q " + args +
                   " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

}  // namespace

TEST(Cli, HelpSucceeds) { EXPECT_EQ(run_cli("--help"), 0); }

TEST(Cli, UsageAndConfigErrorsExitTwo) {
  TempDir tmp("cli");
  EXPECT_EQ(run_cli("no-such-command"), 2);
  EXPECT_EQ(run_cli("split"), 2);
  EXPECT_EQ(run_cli("run -c " + q(tmp / "missing.json") + " -o " + q(tmp / "out")), 2);
  write_text_file(tmp / "bad.json", "{\"unknown\": 1}");
  EXPECT_EQ(run_cli("run -c " + q(tmp / "bad.json") + " -o " + q(tmp / "out")), 2);
}

TEST(Cli, AdapterFailureExitsThree) {
  TempDir tmp("cli");
  write_text_file(tmp / "gen.json",
                  R"({"role": "generator", "command": ["sh", "-c", "exit 9"]})");
  EXPECT_EQ(run_cli("generate --prompt x --count 1 --adapter " + q(tmp / "gen.json") + " -o " +
                    q(tmp / "out")),
            3);
}

TEST(Cli, MalformedDataExitsFour) {
  TempDir tmp("cli");
  write_text_file(tmp / "dets.txt", "img 0 notanumber 0.5 0.5 0.1 0.1\n");
  const auto manifest = synmix::testing::fixtures_dir() / "dataset" / "real.json";
  EXPECT_EQ(run_cli("eval-det -m " + q(manifest) + " -d " + q(tmp / "dets.txt")), 4);
}

TEST(Cli, SplitThenMixWritesManifests) {
  TempDir tmp("cli");
  const auto ds = synmix::testing::fixtures_dir() / "dataset";
  ASSERT_EQ(run_cli("split -m " + q(ds / "real.json") + " -o " + q(tmp / "split")), 0);
  EXPECT_TRUE(fs::exists(tmp / "split" / "train.json"));
  ASSERT_EQ(run_cli("mix --train " + q(tmp / "split" / "train.json") + " --synthetic " +
                    q(ds / "synthetic.json") + " --p 0.2,0.4 --replicates 2 -o " + q(tmp / "mix")),
            0);
  EXPECT_FALSE(fs::is_empty(tmp / "mix"));
}

TEST(Cli, RunsFixtureExperiment) {
  TempDir tmp("cli");
  EXPECT_EQ(run_cli("run -c " + q(synmix::testing::fixtures_dir() / "experiment.json") + " -o " +
                    q(tmp / "out")),
            0);
  EXPECT_TRUE(fs::exists(tmp / "out" / "report" / "mAP50.md"));
  EXPECT_EQ(run_cli("run -c " + q(synmix::testing::fixtures_dir() / "experiment.json") + " -o " +
                    q(tmp / "out")),
            2);
  EXPECT_EQ(run_cli("run --resume -c " + q(synmix::testing::fixtures_dir() / "experiment.json") +
                    " -o " + q(tmp / "out")),
            0);
}
