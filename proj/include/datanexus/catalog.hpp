#pragma once
// Immutable bundle of everything the read side serves: records (snapshot
// plus literature pool), link summaries and the search index.

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "datanexus/ingest.hpp"
#include "datanexus/linkstore.hpp"
#include "datanexus/searchcore.hpp"

namespace datanexus {

inline constexpr std::string_view kPoolFile = "pool.jsonl";
inline constexpr std::string_view kLinksFile = "links.jsonl";
inline constexpr std::string_view kSummariesFile = "summaries.jsonl";
inline constexpr std::string_view kDanglingFile = "dangling.json";

class Catalog {
 public:
  Catalog(const Catalog&) = delete;
  Catalog& operator=(const Catalog&) = delete;

  // Builds directory, summaries and index in memory.
  static std::shared_ptr<Catalog> assemble(std::map<std::string, Record> records,
                                           std::map<std::string, Record> pool,
                                           const std::vector<links::Link>& link_set,
                                           Timestamp built_at) {
    std::shared_ptr<Catalog> c(new Catalog);
    c->records_ = std::move(records);
    c->pool_ = std::move(pool);
    c->built_at_ = built_at;
    c->index_directory();
    auto built = links::build_link_summaries(c->directory_, link_set);
    c->summaries_ = std::move(built.summaries);
    c->dangling_ = std::move(built.dangling);
    c->index_ = search::build_index(c->directory_.records());
    return c;
  }

  // Loads the artifacts written by the ingest, links and build-index stages.
  static std::shared_ptr<Catalog> load(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    std::shared_ptr<Catalog> c(new Catalog);
    auto snap = ingest::read_snapshot(dir);
    c->records_ = std::move(snap.records);
    c->built_at_ = snap.built_at;
    if (fs::exists(dir / kPoolFile)) c->pool_ = ingest::read_records_file(dir / kPoolFile);
    c->index_directory();
    c->index_ = search::read_index(dir);
    const auto summaries_path = dir / kSummariesFile;
    if (!fs::exists(summaries_path)) {
      throw Error(ErrorCode::artifact_missing, "missing summaries file: " + summaries_path.string());
    }
    for (const auto& line : io::split_lines(io::read_file(summaries_path))) {
      if (io::is_blank(line)) continue;
      json j;
      try {
        j = json::parse(line);
      } catch (const json::exception& e) {
        throw Error(ErrorCode::artifact_corrupt, "malformed " + summaries_path.string() + ": " + e.what());
      }
      auto s = links::summary_from_json(j);
      std::string id = s.record_id;
      c->summaries_.emplace(std::move(id), std::move(s));
    }
    if (c->index_.doc_count() != c->directory_.size()) {
      throw Error(ErrorCode::artifact_corrupt,
                  "index holds " + std::to_string(c->index_.doc_count()) + " documents but " +
                      std::to_string(c->directory_.size()) + " records are loaded; rerun build-index");
    }
    return c;
  }

  const std::map<std::string, Record>& records() const { return records_; }
  const std::map<std::string, Record>& pool() const { return pool_; }
  const links::RecordDirectory& directory() const { return directory_; }
  const search::IndexSnapshot& index() const { return index_; }
  const std::map<std::string, links::LinkSummary>& summaries() const { return summaries_; }
  const std::vector<links::DanglingLink>& dangling() const { return dangling_; }
  Timestamp built_at() const { return built_at_; }

  const Record* find(std::string_view id) const { return directory_.find(id); }

  const links::LinkSummary* summary(std::string_view id) const {
    auto it = summaries_.find(std::string(id));
    return it == summaries_.end() ? nullptr : &it->second;
  }

 private:
  Catalog() = default;

  void index_directory() {
    directory_.add_all(records_);
    directory_.add_all(pool_);
  }

  std::map<std::string, Record> records_;
  std::map<std::string, Record> pool_;
  links::RecordDirectory directory_;
  search::IndexSnapshot index_;
  std::map<std::string, links::LinkSummary> summaries_;
  std::vector<links::DanglingLink> dangling_;
  Timestamp built_at_{};
};

inline std::string serialize_summaries(const std::map<std::string, links::LinkSummary>& summaries) {
  std::string out;
  for (const auto& [id, s] : summaries) {
    out += links::summary_to_json(s).dump();
    out += '\n';
  }
  return out;
}

}  // namespace datanexus
