#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "datanexus/cli.hpp"
#include "datanexus/model.hpp"
#include "support/oracles.hpp"

namespace testing_support {

namespace fs = std::filesystem;

inline fs::path fixture(const std::string& rel) { return fs::path(DATANEXUS_FIXTURES) / rel; }

inline fs::path share_file(const std::string& rel) { return fs::path(DATANEXUS_SHARE) / rel; }

class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
    path_ = fs::temp_directory_path() /
            ("datanexus-test-" + std::to_string(stamp) + "-" + std::to_string(counter++));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  fs::path path_;
};

struct CliRun {
  int exit_code;
  std::string out;
  std::string err;
};

inline CliRun run_cli(const std::vector<std::string>& args) {
  std::ostringstream out;
  std::ostringstream err;
  const int code = datanexus::cli::run_command(args, out, err);
  return {code, out.str(), err.str()};
}

inline constexpr const char* kFixedBuildTime = "2024-01-01T00:00:00Z";

// Runs ingest, link import and extraction, merge and index build over the
// bundled fixture into `dir`.
inline void build_fixture_artifacts(const fs::path& dir) {
  const std::string out = dir.string();
  const std::vector<std::vector<std::string>> steps = {
      {"--build-time", kFixedBuildTime, "ingest", "--sources", fixture("sources.json").string(), "--out", out},
      {"--build-time", kFixedBuildTime, "links", "import", "--file", fixture("links.jsonl").string(),
       "--origin", "curated", "--out", out},
      {"--build-time", kFixedBuildTime, "links", "extract", "--fulltexts", fixture("fulltexts").string(),
       "--registry", fixture("registry.jsonl").string(), "--out", out},
      {"links", "merge", "--out", out},
      {"build-index", "--out", out},
  };
  for (const auto& s : steps) {
    auto r = run_cli(s);
    if (r.exit_code != 0) throw std::runtime_error("fixture pipeline failed: " + r.err);
  }
}

// Artifacts of the bundled fixture, built once per test process.
inline const fs::path& shared_fixture_artifacts() {
  static TempDir dir;
  static const bool built = (build_fixture_artifacts(dir.path()), true);
  (void)built;
  return dir.path();
}

inline oracle::Doc to_oracle_doc(const datanexus::Record& r) {
  oracle::Doc d;
  d.id = r.id;
  d.category = std::string(datanexus::to_string(r.category));
  d.year = r.year;
  d.source = r.source;
  d.language = r.language;
  d.title = r.title;
  d.description = r.description;
  d.creators = r.creators;
  for (const auto& [k, v] : r.type_specific) d.extra.push_back(v);
  d.full_text = r.full_text.value_or("");
  return d;
}

inline datanexus::Record make_record(std::string id, datanexus::Category category, std::string title,
                                     std::optional<int> year = std::nullopt) {
  datanexus::Record r;
  r.id = std::move(id);
  r.category = category;
  r.title = std::move(title);
  r.year = year;
  r.source = r.id.substr(0, r.id.find('-'));
  return r;
}

}  // namespace testing_support
