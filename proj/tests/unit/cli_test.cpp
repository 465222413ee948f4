#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>

#include "datanexus/cli.hpp"
#include "support/helpers.hpp"

using namespace datanexus;
using testing_support::fixture;
using testing_support::run_cli;
using testing_support::TempDir;

namespace {

std::map<std::string, std::string> artifact_bytes(const std::filesystem::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.is_regular_file()) out[e.path().filename().string()] = io::read_file(e.path());
  }
  return out;
}

}  // namespace

TEST(Cli, UnknownSubcommandIsUsageError) {
  auto r = run_cli({"frobnicate"});
  EXPECT_EQ(r.exit_code, 1);
  EXPECT_FALSE(r.err.empty());
  EXPECT_EQ(run_cli({}).exit_code, 1);
  EXPECT_EQ(run_cli({"ingest"}).exit_code, 1);
}

TEST(Cli, HelpSucceeds) {
  auto r = run_cli({"--help"});
  EXPECT_EQ(r.exit_code, 0);
  EXPECT_NE(r.out.find("build-index"), std::string::npos);
}

TEST(Cli, BuildIndexWithoutSnapshotNamesTheFile) {
  TempDir dir;
  auto r = run_cli({"build-index", "--out", dir.path().string()});
  EXPECT_EQ(r.exit_code, 2);
  EXPECT_NE(r.err.find("snapshot.jsonl"), std::string::npos) << r.err;
}

TEST(Cli, BadBuildTimeIsUsageError) {
  TempDir dir;
  auto r = run_cli({"--build-time", "noon", "ingest", "--sources", fixture("sources.json").string(), "--out",
                    dir.path().string()});
  EXPECT_EQ(r.exit_code, 1);
}

TEST(Cli, IngestWritesSnapshotAndReport) {
  TempDir dir;
  auto r = run_cli({"--build-time", testing_support::kFixedBuildTime, "ingest", "--sources",
                    fixture("sources.json").string(), "--out", dir.path().string()});
  ASSERT_EQ(r.exit_code, 0) << r.err;
  EXPECT_TRUE(std::filesystem::exists(dir / "snapshot.jsonl"));
  EXPECT_NE(r.out.find("ingested 17 records (2 rejected)"), std::string::npos) << r.out;
}

TEST(Cli, FullPipelineArtifacts) {
  const auto& dir = testing_support::shared_fixture_artifacts();
  for (const char* name : {"snapshot.jsonl", "pool.jsonl", "links.jsonl", "summaries.jsonl", "index.bin",
                           "dangling.json"}) {
    EXPECT_TRUE(std::filesystem::exists(dir / name)) << name;
  }
  const json dangling = json::parse(io::read_file(dir / "dangling.json"));
  EXPECT_EQ(dangling["count"], 0);
  auto stats = run_cli({"stats", "--artifacts", dir.string()});
  ASSERT_EQ(stats.exit_code, 0) << stats.err;
  EXPECT_EQ(json::parse(stats.out)["links"]["total"], 10);
}

TEST(Cli, RerunIsByteIdentical) {
  TempDir a;
  TempDir b;
  testing_support::build_fixture_artifacts(a.path());
  testing_support::build_fixture_artifacts(b.path());
  EXPECT_EQ(artifact_bytes(a.path()), artifact_bytes(b.path()));
}

TEST(Cli, AnalyzeMatchesGoldenReport) {
  TempDir dir;
  const auto report = dir / "report.json";
  const auto paths = dir / "paths.csv";
  auto r = run_cli({"analyze", "--logs", fixture("events.jsonl").string(), "--out", report.string(),
                    "--paths-csv", paths.string()});
  ASSERT_EQ(r.exit_code, 0) << r.err;
  EXPECT_EQ(json::parse(io::read_file(report)), json::parse(io::read_file(fixture("expected_report.json"))));
  EXPECT_EQ(io::read_file(paths).rfind("step,from_class,to_class,count\n", 0), 0u);
}

TEST(Cli, AnalyzeMissingLogIsDataError) {
  TempDir dir;
  auto r = run_cli({"analyze", "--logs", (dir / "none-*.jsonl").string(), "--out", (dir / "r.json").string()});
  EXPECT_EQ(r.exit_code, 2);
}

TEST(Cli, AnalyzeRejectsNonPositiveDepth) {
  auto r = run_cli({"analyze", "--logs", fixture("events.jsonl").string(), "--path-depth", "0"});
  EXPECT_EQ(r.exit_code, 1);
}

TEST(CliBinary, ExitCodesFromTheExecutable) {
  const std::string bin = DATANEXUS_CLI;
  auto status = [](const std::string& cmd) {
    const int raw = std::system((cmd + " >/dev/null 2>&1").c_str());
    return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  };
  TempDir dir;
  EXPECT_EQ(status(bin + " --help"), 0);
  EXPECT_EQ(status(bin + " nonsense"), 1);
  EXPECT_EQ(status(bin + " build-index --out " + dir.path().string()), 2);
}
