#pragma once
// Source loading, normalization into the common schema, and the
// full-rebuild deduplication fold that produces a CorpusSnapshot.

#include <algorithm>
#include <climits>
#include <filesystem>
#include <fstream>
#include <future>
#include <istream>
#include <map>
#include <set>
#include <sstream>
#include <tuple>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "datanexus/hash.hpp"
#include "datanexus/io.hpp"
#include "datanexus/model.hpp"
#include "datanexus/timestamp.hpp"

namespace datanexus::ingest {

namespace fs = std::filesystem;

struct RejectReport {
  std::size_t line = 0;  // 1-based
  std::string reason;    // machine-readable, e.g. "title-required"
  std::string detail;

  friend bool operator==(const RejectReport&, const RejectReport&) = default;
};

struct LoadResult {
  std::vector<Record> records;
  std::vector<RejectReport> rejects;
  std::size_t lines_read = 0;
};

struct SourceCounts {
  std::size_t read = 0;
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::size_t merged = 0;

  friend bool operator==(const SourceCounts&, const SourceCounts&) = default;
};

struct SourceReport {
  SourceCounts counts;
  std::vector<RejectReport> rejects;
};

struct CorpusSnapshot {
  std::map<std::string, Record> records;  // keyed and ordered by id
  Timestamp built_at{};
  std::map<std::string, SourceReport> source_report;
};

// --- source configuration --------------------------------------------------

inline bool is_schema_field(std::string_view f) {
  static const std::set<std::string_view> kFields = {
      "id",        "title",     "description", "creators", "year",
      "language",  "rights",    "category",    "full_text", "materials",
      "external_ids", "doi",    "dara",        "urn",      "source_local",
      "type_specific"};
  return kFields.contains(f) || (f.starts_with("type_specific.") && f.size() > 14);
}

inline void validate_descriptors(const std::vector<SourceDescriptor>& descriptors) {
  std::set<std::string> keys;
  for (const auto& d : descriptors) {
    if (d.key.empty()) throw Error(ErrorCode::invalid_argument, "source with empty key");
    if (!keys.insert(d.key).second) {
      throw Error(ErrorCode::invalid_argument, "duplicate source key '" + d.key + "'");
    }
    if (d.priority < 0) {
      throw Error(ErrorCode::invalid_argument, "source '" + d.key + "': negative priority");
    }
    if (d.format != "records-jsonl") {
      throw Error(ErrorCode::invalid_argument,
                  "source '" + d.key + "': unsupported format '" + d.format + "'");
    }
    for (const auto& [from, to] : d.field_map) {
      if (!is_schema_field(to)) {
        throw Error(ErrorCode::invalid_argument,
                    "source '" + d.key + "': field_map target '" + to + "' is not a schema field");
      }
    }
  }
}

// Reads `{"sources": [...]}`. Relative paths resolve against the config's
// directory.
inline std::vector<SourceDescriptor> load_source_config(const fs::path& config_path) {
  std::string content;
  try {
    content = io::read_file(config_path);
  } catch (const Error&) {
    throw Error(ErrorCode::artifact_missing, "cannot read sources config: " + config_path.string());
  }
  std::vector<SourceDescriptor> out;
  try {
    const json cfg = json::parse(content);
    const fs::path base = config_path.parent_path();
    for (const auto& s : cfg.at("sources")) {
      SourceDescriptor d;
      d.key = s.at("key").get<std::string>();
      fs::path p = s.at("path").get<std::string>();
      d.path = (p.is_relative() ? base / p : p).string();
      d.format = s.value("format", std::string("records-jsonl"));
      const auto cat_name = s.at("default_category").get<std::string>();
      const auto cat = parse_category(cat_name);
      if (!cat) {
        throw Error(ErrorCode::invalid_category,
                    "source '" + d.key + "': unknown default_category '" + cat_name + "'");
      }
      d.default_category = *cat;
      if (s.contains("field_map")) {
        d.field_map = s["field_map"].get<std::map<std::string, std::string>>();
      }
      d.priority = s.value("priority", 0);
      out.push_back(std::move(d));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::invalid_argument,
                "malformed sources config " + config_path.string() + ": " + e.what());
  }
  validate_descriptors(out);
  return out;
}

// --- per-line normalization ------------------------------------------------

namespace detail {

struct RowReject {
  std::string reason;
  std::string detail;
};

inline std::string scalar_to_string(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  return v.dump();
}

// Year from an integer or from the leading four digits of a string.
inline std::optional<int> extract_year(const json& v) {
  if (v.is_number_integer()) return static_cast<int>(v.get<long long>());
  if (v.is_string()) {
    const std::string_view s = text::trim(v.get_ref<const std::string&>());
    if (s.size() >= 4 && std::all_of(s.begin(), s.begin() + 4,
                                     [](char c) { return c >= '0' && c <= '9'; })) {
      return std::stoi(std::string(s.substr(0, 4)));
    }
  }
  return std::nullopt;
}

inline json apply_field_map(const json& row, const std::map<std::string, std::string>& field_map) {
  json mapped = json::object();
  for (const auto& [key, value] : row.items()) {
    auto it = field_map.find(key);
    const std::string& target = it == field_map.end() ? key : it->second;
    if (target.starts_with("type_specific.")) {
      mapped["type_specific"][target.substr(14)] = value;
    } else if (target == "type_specific" && mapped.contains("type_specific") && value.is_object()) {
      for (const auto& [k, v] : value.items()) mapped["type_specific"][k] = v;
    } else {
      mapped[target] = value;
    }
  }
  return mapped;
}

inline std::variant<Record, RowReject> normalize_row(const SourceDescriptor& d,
                                                     std::string_view line) {
  json row;
  try {
    row = json::parse(line);
  } catch (const json::exception& e) {
    return RowReject{"malformed", e.what()};
  }
  if (!row.is_object()) return RowReject{"malformed", "line is not an object"};
  const json m = apply_field_map(row, d.field_map);

  Record r;
  if (!m.contains("id") || !(m["id"].is_string() || m["id"].is_number_integer())) {
    return RowReject{"id-required", "missing source row id"};
  }
  const std::string row_id(text::trim(scalar_to_string(m["id"])));
  if (row_id.empty()) return RowReject{"id-required", "empty source row id"};
  r.id = d.key + "-" + row_id;
  r.source = d.key;

  if (!m.contains("title") || !m["title"].is_string() ||
      text::trim(m["title"].get_ref<const std::string&>()).empty()) {
    return RowReject{"title-required", "missing title"};
  }
  r.title = std::string(text::trim(m["title"].get_ref<const std::string&>()));

  r.category = d.default_category;
  if (m.contains("category")) {
    const auto& c = m["category"];
    const auto parsed = c.is_string() ? parse_category(c.get_ref<const std::string&>())
                                      : std::nullopt;
    if (!parsed) return RowReject{"unknown-category", scalar_to_string(c)};
    r.category = *parsed;
  }

  if (m.contains("description") && m["description"].is_string()) {
    r.description = m["description"].get<std::string>();
  }
  if (m.contains("creators")) {
    const auto& c = m["creators"];
    if (c.is_string()) {
      if (!text::trim(c.get_ref<const std::string&>()).empty()) {
        r.creators.emplace_back(text::trim(c.get_ref<const std::string&>()));
      }
    } else if (c.is_array()) {
      for (const auto& name : c) {
        if (name.is_string() && !text::trim(name.get_ref<const std::string&>()).empty()) {
          r.creators.emplace_back(text::trim(name.get_ref<const std::string&>()));
        }
      }
    }
  }
  if (m.contains("year") && !m["year"].is_null()) {
    const auto year = extract_year(m["year"]);
    if (!year || *year < kMinYear || *year > kMaxYear) {
      return RowReject{"invalid-year", scalar_to_string(m["year"])};
    }
    r.year = year;
  }
  if (m.contains("language") && m["language"].is_string()) {
    std::string lang = text::ascii_lower(text::trim(m["language"].get_ref<const std::string&>()));
    if (lang.size() == 2 && std::all_of(lang.begin(), lang.end(),
                                        [](char ch) { return ch >= 'a' && ch <= 'z'; })) {
      r.language = std::move(lang);
    }
  }
  if (m.contains("rights") && m["rights"].is_string()) r.rights = m["rights"].get<std::string>();
  if (m.contains("full_text") && m["full_text"].is_string()) {
    r.full_text = m["full_text"].get<std::string>();
  }

  std::vector<std::pair<std::string, json>> raw_ids;
  if (m.contains("external_ids") && m["external_ids"].is_object()) {
    for (const auto& [k, v] : m["external_ids"].items()) raw_ids.emplace_back(k, v);
  }
  for (IdScheme s : kSchemePriority) {
    const std::string name(to_string(s));
    if (m.contains(name)) raw_ids.emplace_back(name, m[name]);
  }
  for (const auto& [name, value] : raw_ids) {
    const auto scheme = parse_id_scheme(name);
    if (!scheme) return RowReject{"invalid-identifier", "unknown scheme " + name};
    if (!value.is_string() && !value.is_number_integer()) {
      return RowReject{"invalid-identifier", name};
    }
    try {
      r.external_ids[*scheme] = normalize_identifier(*scheme, scalar_to_string(value));
    } catch (const Error& e) {
      return RowReject{"invalid-identifier", e.what()};
    }
  }

  if (m.contains("materials") && m["materials"].is_array()) {
    for (const auto& mat : m["materials"]) {
      if (!mat.is_object() || !mat.contains("url") || !mat["url"].is_string()) continue;
      MaterialKind kind = MaterialKind::other;
      if (mat.contains("kind") && mat["kind"].is_string()) {
        kind = parse_material_kind(mat["kind"].get<std::string>()).value_or(MaterialKind::other);
      }
      r.materials.push_back({kind, mat["url"].get<std::string>()});
    }
    canonicalize_materials(r.materials);
  }
  if (m.contains("type_specific") && m["type_specific"].is_object()) {
    for (const auto& [k, v] : m["type_specific"].items()) {
      if (!v.is_null()) r.type_specific[k] = scalar_to_string(v);
    }
  }
  return r;
}

}  // namespace detail

inline LoadResult load_and_normalize(const SourceDescriptor& descriptor,
                                     const std::vector<std::string>& lines) {
  LoadResult out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (io::is_blank(lines[i])) continue;
    ++out.lines_read;
    auto result = detail::normalize_row(descriptor, lines[i]);
    if (auto* rec = std::get_if<Record>(&result)) {
      out.records.push_back(std::move(*rec));
    } else {
      auto& rej = std::get<detail::RowReject>(result);
      out.rejects.push_back({i + 1, std::move(rej.reason), std::move(rej.detail)});
    }
  }
  return out;
}

inline LoadResult load_and_normalize(const SourceDescriptor& descriptor, std::istream& in) {
  return load_and_normalize(descriptor, io::read_lines(in));
}

// --- merging ---------------------------------------------------------------

// Source key -> priority (lower wins). Unknown sources rank last.
using SourcePriorities = std::map<std::string, int, std::less<>>;

inline Record merge_records(const Record& a, const Record& b,
                            const SourcePriorities& priorities = {}) {
  if (dedup_key(a) != dedup_key(b)) {
    throw Error(ErrorCode::merge_precondition,
                "cannot merge '" + a.id + "' and '" + b.id + "': dedup keys differ");
  }
  auto priority_of = [&](const Record& r) {
    auto it = priorities.find(r.source);
    return it == priorities.end() ? INT_MAX : it->second;
  };
  const int pa = priority_of(a);
  const int pb = priority_of(b);
  const bool a_wins = pa < pb || (pa == pb && a.id <= b.id);
  const Record& win = a_wins ? a : b;
  const Record& lose = a_wins ? b : a;

  Record out = win;
  out.id = std::min(a.id, b.id);
  for (const auto& [scheme, value] : lose.external_ids) out.external_ids.try_emplace(scheme, value);
  out.materials.insert(out.materials.end(), lose.materials.begin(), lose.materials.end());
  canonicalize_materials(out.materials);
  if (out.description.empty()) out.description = lose.description;
  if (out.creators.empty()) out.creators = lose.creators;
  if (!out.year) out.year = lose.year;
  if (!out.language) out.language = lose.language;
  if (!out.rights) out.rights = lose.rights;
  if (!out.full_text) out.full_text = lose.full_text;
  for (const auto& [k, v] : lose.type_specific) out.type_specific.try_emplace(k, v);

  std::set<std::string> constituents(a.merged_from.begin(), a.merged_from.end());
  constituents.insert(b.merged_from.begin(), b.merged_from.end());
  constituents.insert(a.id);
  constituents.insert(b.id);
  constituents.erase(out.id);
  out.merged_from.assign(constituents.begin(), constituents.end());
  return out;
}

// --- snapshot build --------------------------------------------------------

struct BuildOptions {
  Timestamp built_at{};
};

inline CorpusSnapshot build_snapshot(const std::vector<SourceDescriptor>& descriptors,
                                     const BuildOptions& options = {}) {
  validate_descriptors(descriptors);

  std::vector<std::future<LoadResult>> pending;
  pending.reserve(descriptors.size());
  for (const auto& d : descriptors) {
    pending.push_back(std::async(std::launch::async, [&d] {
      std::ifstream in(d.path, std::ios::binary);
      if (!in) {
        throw Error(ErrorCode::source_unreadable,
                    "source '" + d.key + "': cannot read " + d.path);
      }
      return load_and_normalize(d, in);
    }));
  }
  std::vector<LoadResult> loaded;
  loaded.reserve(pending.size());
  for (auto& f : pending) loaded.push_back(f.get());

  CorpusSnapshot snap;
  snap.built_at = options.built_at;
  SourcePriorities priorities;
  for (const auto& d : descriptors) priorities[d.key] = d.priority;

  // Fold order: descriptor priority, then key, then line order.
  std::vector<std::size_t> order(descriptors.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    return std::tie(descriptors[x].priority, descriptors[x].key) <
           std::tie(descriptors[y].priority, descriptors[y].key);
  });

  std::vector<Record> groups;
  std::unordered_map<DedupKey, std::size_t> group_of_key;
  std::unordered_map<std::string, DedupKey> key_of_id;
  for (std::size_t idx : order) {
    const auto& d = descriptors[idx];
    auto& result = loaded[idx];
    auto& report = snap.source_report[d.key];
    report.counts.read = result.lines_read;
    report.rejects = std::move(result.rejects);
    for (auto& rec : result.records) {
      DedupKey key = dedup_key(rec);
      auto seen = key_of_id.find(rec.id);
      if (seen != key_of_id.end() && seen->second != key) {
        report.rejects.push_back({0, "duplicate-id", rec.id});
        continue;
      }
      key_of_id.emplace(rec.id, key);
      auto [it, inserted] = group_of_key.try_emplace(std::move(key), groups.size());
      if (inserted) {
        groups.push_back(std::move(rec));
      } else {
        groups[it->second] = merge_records(groups[it->second], rec, priorities);
        ++report.counts.merged;
      }
    }
    report.counts.rejected = report.rejects.size();
    report.counts.accepted = report.counts.read - report.counts.rejected;
  }

  std::set<DedupKey> final_keys;
  for (auto& rec : groups) {
    if (!final_keys.insert(dedup_key(rec)).second) {
      throw std::logic_error("dedup key collision after merge for " + rec.id);
    }
    std::string id = rec.id;
    snap.records.emplace(std::move(id), std::move(rec));
  }
  return snap;
}

// --- canonical artifacts ---------------------------------------------------

inline std::string serialize_records(const std::map<std::string, Record>& records) {
  std::string out;
  for (const auto& [id, rec] : records) {
    out += record_to_json(rec).dump();
    out += '\n';
  }
  return out;
}

inline std::string snapshot_digest(const CorpusSnapshot& snap) {
  return fnv1a_hex(serialize_records(snap.records));
}

inline json source_report_to_json(const CorpusSnapshot& snap) {
  json sources = json::object();
  for (const auto& [key, rep] : snap.source_report) {
    json rejects = json::array();
    for (const auto& r : rep.rejects) {
      rejects.push_back({{"line", r.line}, {"reason", r.reason}, {"detail", r.detail}});
    }
    sources[key] = {{"read", rep.counts.read},
                    {"accepted", rep.counts.accepted},
                    {"rejected", rep.counts.rejected},
                    {"merged", rep.counts.merged},
                    {"rejects", std::move(rejects)}};
  }
  return {{"built_at", format_timestamp(snap.built_at)},
          {"record_count", snap.records.size()},
          {"sources", std::move(sources)}};
}

inline constexpr std::string_view kSnapshotFile = "snapshot.jsonl";
inline constexpr std::string_view kSourceReportFile = "source_report.json";

inline void write_snapshot(const CorpusSnapshot& snap, const fs::path& dir) {
  io::write_file(dir / kSnapshotFile, serialize_records(snap.records));
  io::write_file(dir / kSourceReportFile, source_report_to_json(snap).dump(2) + "\n");
}

inline std::map<std::string, Record> read_records_file(const fs::path& path) {
  std::map<std::string, Record> records;
  const auto lines = io::split_lines(io::read_file(path));
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (io::is_blank(lines[i])) continue;
    json j;
    try {
      j = json::parse(lines[i]);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::artifact_corrupt,
                  path.string() + ":" + std::to_string(i + 1) + ": " + e.what());
    }
    Record r = record_from_json(j);
    std::string id = r.id;
    records.emplace(std::move(id), std::move(r));
  }
  return records;
}

inline CorpusSnapshot read_snapshot(const fs::path& dir) {
  const fs::path path = dir / kSnapshotFile;
  if (!fs::exists(path)) {
    throw Error(ErrorCode::artifact_missing, "missing snapshot file: " + path.string());
  }
  CorpusSnapshot snap;
  snap.records = read_records_file(path);
  const fs::path report = dir / kSourceReportFile;
  if (fs::exists(report)) {
    try {
      const json j = json::parse(io::read_file(report));
      if (auto ts = parse_timestamp(j.value("built_at", std::string{}))) snap.built_at = *ts;
      const json sources = j.value("sources", json::object());
      for (const auto& [key, s] : sources.items()) {
        auto& rep = snap.source_report[key];
        rep.counts = {s.value("read", std::size_t{0}), s.value("accepted", std::size_t{0}),
                      s.value("rejected", std::size_t{0}), s.value("merged", std::size_t{0})};
        const json rejects = s.value("rejects", json::array());
        for (const auto& r : rejects) {
          rep.rejects.push_back({r.value("line", std::size_t{0}), r.value("reason", std::string{}),
                                 r.value("detail", std::string{})});
        }
      }
    } catch (const json::exception& e) {
      throw Error(ErrorCode::artifact_corrupt, "malformed " + report.string() + ": " + e.what());
    }
  }
  return snap;
}

}  // namespace datanexus::ingest
