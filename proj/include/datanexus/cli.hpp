#pragma once
// Operator entry point. Each subcommand reads and writes fixed artifact
// names under one directory so stages can run separately.

#include <glob.h>

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"

#include "datanexus/analytics.hpp"
#include "datanexus/apiserver.hpp"
#include "datanexus/catalog.hpp"
#include "datanexus/ingest.hpp"
#include "datanexus/linkstore.hpp"
#include "datanexus/mentions.hpp"

namespace datanexus::cli {

namespace fs = std::filesystem;

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

inline constexpr std::string_view kReportFile = "report.json";

struct Streams {
  std::ostream& out;
  std::ostream& err;
  bool verbose = false;

  void log(const std::string& msg) const {
    if (verbose) err << "[datanexus] " << msg << '\n';
  }
};

// --build-time wins, then SOURCE_DATE_EPOCH (seconds), then the clock.
inline Timestamp resolve_build_time(const std::string& flag) {
  if (!flag.empty()) {
    auto ts = parse_timestamp(flag);
    if (!ts) throw Error(ErrorCode::invalid_argument, "unparseable --build-time '" + flag + "'");
    return *ts;
  }
  if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH"); epoch && *epoch) {
    try {
      return timestamp_from_ms(std::stoll(epoch) * 1000);
    } catch (const std::exception&) {
      throw Error(ErrorCode::invalid_argument, "SOURCE_DATE_EPOCH is not an integer");
    }
  }
  return std::chrono::time_point_cast<std::chrono::seconds>(now_timestamp());
}

inline std::vector<std::string> expand_glob(const std::string& pattern) {
  glob_t g{};
  std::vector<std::string> out;
  if (::glob(pattern.c_str(), 0, nullptr, &g) == 0) {
    for (std::size_t i = 0; i < g.gl_pathc; ++i) out.emplace_back(g.gl_pathv[i]);
  }
  ::globfree(&g);
  std::sort(out.begin(), out.end());
  return out;
}

inline std::string staged_links_name(std::string_view stage, std::string_view origin) {
  return "links-" + std::string(stage) + "-" + std::string(origin) + ".jsonl";
}

inline std::vector<fs::path> staged_link_files(const fs::path& dir) {
  std::vector<fs::path> out;
  if (!fs::is_directory(dir)) return out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (entry.is_regular_file() && name.starts_with("links-") && name.ends_with(".jsonl")) {
      out.push_back(entry.path());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline std::map<std::string, Record> read_pool(const fs::path& dir) {
  const fs::path p = dir / kPoolFile;
  return fs::exists(p) ? ingest::read_records_file(p) : std::map<std::string, Record>{};
}

inline void write_rejects(const fs::path& path, const std::vector<links::LinkReject>& rejects) {
  json rows = json::array();
  for (const auto& r : rejects) rows.push_back({{"line", r.line}, {"reason", r.reason}, {"detail", r.detail}});
  io::write_file(path, json{{"count", rejects.size()}, {"rejects", std::move(rows)}}.dump(2) + "\n");
}

// Imports link rows against the snapshot and the literature pool, then
// writes the staged link file and the (possibly grown) pool.
inline links::ImportResult stage_link_rows(const fs::path& dir, const std::vector<std::string>& rows,
                                           const std::string& origin, std::string_view stage,
                                           Timestamp imported_at, const Streams& io_) {
  auto snap = ingest::read_snapshot(dir);
  links::LiteraturePool pool(read_pool(dir));
  const auto existing_pool = pool.records();
  links::RecordDirectory directory;
  directory.add_all(snap.records);
  directory.add_all(existing_pool);
  for (const auto& [id, rec] : snap.records) {
    if (rec.category == Category::publication) pool.seed(rec);
  }
  auto result = links::import_link_records(rows, origin, {&directory, &pool, imported_at});
  io::write_file(dir / staged_links_name(stage, origin), links::serialize_links(result.links));
  write_rejects(dir / ("links-" + std::string(stage) + "-" + origin + ".rejects.json"), result.rejects);
  if (pool.size() != existing_pool.size() || fs::exists(dir / kPoolFile)) {
    io::write_file(dir / kPoolFile, ingest::serialize_records(pool.records()));
  }
  io_.log(std::to_string(result.links.size()) + " links staged, " + std::to_string(result.rejects.size()) +
          " rejected, pool size " + std::to_string(pool.size()));
  return result;
}

inline int cmd_ingest(const fs::path& sources, const fs::path& out, Timestamp built_at, const Streams& s) {
  auto descriptors = ingest::load_source_config(sources);
  s.log("loading " + std::to_string(descriptors.size()) + " sources");
  auto snap = ingest::build_snapshot(descriptors, {built_at});
  ingest::write_snapshot(snap, out);
  std::size_t rejected = 0;
  for (const auto& [key, rep] : snap.source_report) rejected += rep.counts.rejected;
  s.out << "ingested " << snap.records.size() << " records (" << rejected << " rejected) into "
        << (out / ingest::kSnapshotFile).string() << '\n';
  return kExitOk;
}

inline int cmd_links_import(const fs::path& file, const std::string& origin, const fs::path& dir,
                            Timestamp imported_at, const Streams& s) {
  if (!fs::exists(file)) throw Error(ErrorCode::artifact_missing, "missing links file: " + file.string());
  std::ifstream in(file, std::ios::binary);
  auto rows = io::read_lines(in);
  auto result = stage_link_rows(dir, rows, origin, "import", imported_at, s);
  s.out << "imported " << result.links.size() << " links (" << result.rejects.size() << " rejected) from "
        << file.string() << '\n';
  return kExitOk;
}

inline int cmd_links_extract(const fs::path& fulltexts, const fs::path& registry_path,
                             const std::string& origin, const fs::path& dir, Timestamp imported_at,
                             const Streams& s) {
  if (!fs::is_directory(fulltexts)) {
    throw Error(ErrorCode::artifact_missing, "missing full-text directory: " + fulltexts.string());
  }
  if (!fs::exists(registry_path)) {
    throw Error(ErrorCode::artifact_missing, "missing registry file: " + registry_path.string());
  }
  auto registry = mentions::parse_registry(io::split_lines(io::read_file(registry_path)));
  mentions::AliasTable aliases(registry);

  // One document per file; the file stem names the publication.
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(fulltexts)) {
    if (entry.is_regular_file()) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<mentions::Document> docs;
  docs.reserve(files.size());
  for (const auto& f : files) docs.push_back({f.stem().string(), io::read_file(f)});

  auto extracted = mentions::extract_links(docs, registry, aliases);
  std::vector<std::string> rows;
  rows.reserve(extracted.size());
  for (const auto& l : extracted) rows.push_back(mentions::to_import_row(l).dump());
  auto result = stage_link_rows(dir, rows, origin, "extract", imported_at, s);
  s.out << "extracted " << extracted.size() << " candidate links from " << docs.size() << " documents ("
        << result.links.size() << " staged)\n";
  return kExitOk;
}

inline int cmd_links_merge(const fs::path& dir, const Streams& s) {
  auto snap = ingest::read_snapshot(dir);
  auto pool = read_pool(dir);
  links::RecordDirectory directory;
  directory.add_all(snap.records);
  directory.add_all(pool);
  std::vector<links::Link> all;
  const auto staged = staged_link_files(dir);
  for (const auto& f : staged) {
    auto part = links::read_links_file(f);
    s.log(f.filename().string() + ": " + std::to_string(part.size()) + " links");
    all.insert(all.end(), part.begin(), part.end());
  }
  std::vector<links::DanglingLink> dangling;
  auto merged = links::canonicalize_links(all, directory, dangling);
  io::write_file(dir / kLinksFile, links::serialize_links(merged));
  io::write_file(dir / kDanglingFile, links::dangling_to_json(dangling).dump(2) + "\n");
  s.out << "merged " << all.size() << " staged links from " << staged.size() << " files into "
        << merged.size() << " links (" << dangling.size() << " dangling)\n";
  return kExitOk;
}

inline int cmd_build_index(const fs::path& dir, const Streams& s) {
  auto snap = ingest::read_snapshot(dir);
  auto pool = read_pool(dir);
  std::vector<links::Link> link_set;
  if (fs::exists(dir / kLinksFile)) {
    link_set = links::read_links_file(dir / kLinksFile);
  } else {
    s.log("no " + std::string(kLinksFile) + "; building without links");
  }
  auto catalog = Catalog::assemble(std::move(snap.records), std::move(pool), link_set, snap.built_at);
  search::write_index(catalog->index(), dir);
  io::write_file(dir / kSummariesFile, serialize_summaries(catalog->summaries()));
  io::write_file(dir / kDanglingFile, links::dangling_to_json(catalog->dangling()).dump(2) + "\n");
  s.out << "indexed " << catalog->index().doc_count() << " records with " << link_set.size()
        << " links into " << (dir / search::kIndexFile).string() << '\n';
  return kExitOk;
}

inline int cmd_stats(const fs::path& dir, const Streams& s) {
  auto catalog = Catalog::load(dir);
  s.out << api::handle_stats(catalog.get()).json_body().dump(2) << '\n';
  return kExitOk;
}

inline int cmd_analyze(const std::vector<std::string>& patterns, int timeout_min, int depth,
                       const fs::path& out, const std::string& vocabulary_path,
                       const std::string& paths_csv, const std::string& directions_csv,
                       const Streams& s) {
  auto vocabulary = analytics::ActionVocabulary::defaults();
  if (!vocabulary_path.empty()) {
    vocabulary = analytics::ActionVocabulary::from_json(json::parse(io::read_file(vocabulary_path)));
  }
  std::vector<std::string> files;
  for (const auto& p : patterns) {
    auto matched = expand_glob(p);
    if (matched.empty()) throw Error(ErrorCode::artifact_missing, "no event log matches " + p);
    files.insert(files.end(), matched.begin(), matched.end());
  }
  std::vector<std::string> lines;
  for (const auto& f : files) {
    auto part = io::split_lines(io::read_file(f));
    lines.insert(lines.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
  }
  auto parsed = analytics::parse_events(lines, vocabulary);
  auto sessions = analytics::sessionize(parsed.events, std::chrono::minutes(timeout_min));
  auto report = analytics::compute_report(sessions, static_cast<std::size_t>(depth));
  json doc = analytics::report_to_json(report);
  doc["rejected_events"] = parsed.rejected;
  io::write_file(out, doc.dump(2) + "\n");
  if (!paths_csv.empty()) io::write_file(paths_csv, analytics::path_rows_csv(report.positive_session_paths));
  if (!directions_csv.empty()) io::write_file(directions_csv, analytics::direction_matrix_csv(report));
  s.out << "analyzed " << parsed.events.size() << " events (" << parsed.rejected << " rejected) in "
        << sessions.size() << " sessions into " << out.string() << '\n';
  return kExitOk;
}

namespace detail {
inline std::atomic<bool> g_stop{false};
inline std::atomic<bool> g_reload{false};
extern "C" inline void on_signal(int sig) {
  if (sig == SIGHUP) {
    g_reload = true;
  } else {
    g_stop = true;
  }
}
}  // namespace detail

inline int cmd_serve(const fs::path& dir, const std::string& host, int port, const fs::path& event_log,
                     const std::string& vocabulary_path, const Streams& s) {
  api::ServerConfig config;
  config.host = host;
  config.port = port;
  config.event_log = event_log;
  if (!vocabulary_path.empty()) {
    config.vocabulary = analytics::ActionVocabulary::from_json(json::parse(io::read_file(vocabulary_path)));
  }
  api::ApiServer server(std::move(config));
  server.reload(dir);
  if (!server.bind(port)) throw Error(ErrorCode::invalid_argument, "cannot bind port " + std::to_string(port));

  detail::g_stop = false;
  detail::g_reload = false;
  std::signal(SIGHUP, detail::on_signal);
  std::signal(SIGINT, detail::on_signal);
  std::signal(SIGTERM, detail::on_signal);
  std::thread watcher([&] {
    while (!detail::g_stop) {
      if (detail::g_reload.exchange(false)) {
        try {
          server.reload(dir);
          s.log("snapshot reloaded from " + dir.string());
        } catch (const Error& e) {
          s.err << "reload failed, keeping previous snapshot: " << e.what() << '\n';
        }
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(100));
    }
    server.stop();
  });
  s.out << "serving " << dir.string() << " on http://" << host << ":" << port << '\n' << std::flush;
  server.run();
  detail::g_stop = true;
  watcher.join();
  return kExitOk;
}

// args excludes the program name.
inline int run_command(const std::vector<std::string>& args, std::ostream& out = std::cout,
                       std::ostream& err = std::cerr) {
  CLI::App app{"datanexus: integrated search over linked research records", "datanexus"};
  app.require_subcommand(1);
  bool verbose = false;
  std::string build_time;
  app.add_flag("--verbose,-v", verbose, "log progress to stderr");
  app.add_option("--build-time", build_time, "timestamp recorded in artifacts (ISO 8601)");

  fs::path out_dir = "build";
  fs::path sources;
  auto* ingest_cmd = app.add_subcommand("ingest", "normalize and deduplicate sources into a snapshot");
  ingest_cmd->add_option("--sources", sources, "source descriptor config")->required();
  ingest_cmd->add_option("--out,--artifacts", out_dir, "artifact directory");

  auto* links_cmd = app.add_subcommand("links", "import, extract and merge links");
  links_cmd->require_subcommand(1);
  fs::path links_file;
  std::string origin;
  auto* import_cmd = links_cmd->add_subcommand("import", "stage links from a links file");
  import_cmd->add_option("--file", links_file, "links file")->required();
  import_cmd->add_option("--origin", origin, "provenance origin key")->required();
  import_cmd->add_option("--out,--artifacts", out_dir, "artifact directory");

  fs::path fulltexts;
  fs::path registry;
  std::string extract_origin = "infolink-lite";
  auto* extract_cmd = links_cmd->add_subcommand("extract", "stage links mined from full texts");
  extract_cmd->add_option("--fulltexts", fulltexts, "directory of <record-id>.txt files")->required();
  extract_cmd->add_option("--registry", registry, "dataset registry file")->required();
  extract_cmd->add_option("--origin", extract_origin, "provenance origin key");
  extract_cmd->add_option("--out,--artifacts", out_dir, "artifact directory");

  auto* merge_cmd = links_cmd->add_subcommand("merge", "merge staged links into the canonical link set");
  merge_cmd->add_option("--out,--artifacts", out_dir, "artifact directory");

  auto* index_cmd = app.add_subcommand("build-index", "build the search index and link summaries");
  index_cmd->add_option("--out,--artifacts", out_dir, "artifact directory");

  std::string host = "127.0.0.1";
  int port = 8080;
  fs::path event_log = "events.jsonl";
  std::string vocabulary;
  auto* serve_cmd = app.add_subcommand("serve", "serve the JSON API");
  serve_cmd->add_option("--artifacts,--out", out_dir, "artifact directory");
  serve_cmd->add_option("--host", host, "listen address");
  serve_cmd->add_option("--port", port, "listen port")->check(CLI::Range(1, 65535));
  serve_cmd->add_option("--event-log", event_log, "usage event log file");
  serve_cmd->add_option("--vocabulary", vocabulary, "action vocabulary file");

  std::vector<std::string> log_patterns;
  int timeout_min = 30;
  int depth = 8;
  fs::path report_path = std::string(kReportFile);
  std::string paths_csv;
  std::string directions_csv;
  auto* analyze_cmd = app.add_subcommand("analyze", "compute the usage report from event logs");
  analyze_cmd->add_option("--logs", log_patterns, "event log files or glob patterns")->required();
  analyze_cmd->add_option("--timeout-min", timeout_min, "session inactivity timeout")
      ->check(CLI::PositiveNumber);
  analyze_cmd->add_option("--path-depth", depth, "path aggregation depth")->check(CLI::PositiveNumber);
  analyze_cmd->add_option("--out", report_path, "report file");
  analyze_cmd->add_option("--vocabulary", vocabulary, "action vocabulary file");
  analyze_cmd->add_option("--paths-csv", paths_csv, "write path transitions as CSV");
  analyze_cmd->add_option("--directions-csv", directions_csv, "write the link direction matrix as CSV");

  auto* stats_cmd = app.add_subcommand("stats", "print corpus and link statistics");
  stats_cmd->add_option("--artifacts,--out", out_dir, "artifact directory");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  Streams s{out, err, verbose};
  try {
    if (*ingest_cmd) return cmd_ingest(sources, out_dir, resolve_build_time(build_time), s);
    if (*import_cmd) return cmd_links_import(links_file, origin, out_dir, resolve_build_time(build_time), s);
    if (*extract_cmd) {
      return cmd_links_extract(fulltexts, registry, extract_origin, out_dir, resolve_build_time(build_time), s);
    }
    if (*merge_cmd) return cmd_links_merge(out_dir, s);
    if (*index_cmd) return cmd_build_index(out_dir, s);
    if (*serve_cmd) return cmd_serve(out_dir, host, port, event_log, vocabulary, s);
    if (*analyze_cmd) {
      return cmd_analyze(log_patterns, timeout_min, depth, report_path, vocabulary, paths_csv, directions_csv, s);
    }
    if (*stats_cmd) return cmd_stats(out_dir, s);
  } catch (const Error& e) {
    err << "error [" << to_string(e.code()) << "]: " << e.what() << '\n';
    return e.code() == ErrorCode::invalid_argument ? kExitUsage : kExitData;
  } catch (const json::exception& e) {
    err << "error [artifact-corrupt]: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
  err << app.help();
  return kExitUsage;
}

}  // namespace datanexus::cli
