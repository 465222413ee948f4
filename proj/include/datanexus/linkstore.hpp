#pragma once
// Link import, reference resolution against the literature pool, duplicate
// link merging with provenance, and per-record link summaries.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "datanexus/hash.hpp"
#include "datanexus/io.hpp"
#include "datanexus/model.hpp"
#include "datanexus/timestamp.hpp"

namespace datanexus::links {

namespace fs = std::filesystem;

enum class LinkMethod { manual, automatic };
enum class LinkLabel { used, mentioned };

inline std::string_view to_string(LinkMethod m) {
  return m == LinkMethod::manual ? "manual" : "automatic";
}

inline std::optional<LinkMethod> parse_method(std::string_view s) {
  if (s == "manual") return LinkMethod::manual;
  if (s == "automatic") return LinkMethod::automatic;
  return std::nullopt;
}

inline std::string_view to_string(LinkLabel l) {
  return l == LinkLabel::used ? "used" : "mentioned";
}

struct ProvenanceEntry {
  std::string origin;
  LinkMethod method = LinkMethod::manual;
  Timestamp imported_at{};
  std::optional<std::string> note;

  friend bool operator==(const ProvenanceEntry&, const ProvenanceEntry&) = default;
};

struct Link {
  std::string id;
  std::string from_id;
  std::string to_id;
  Category from_category = Category::publication;
  Category to_category = Category::publication;
  LinkMethod method = LinkMethod::manual;
  double confidence = 1.0;
  LinkLabel label = LinkLabel::used;
  std::optional<std::string> evidence_passage;
  std::vector<ProvenanceEntry> provenance;

  friend bool operator==(const Link&, const Link&) = default;
};

// Used iff the confidence is exactly 1.0.
inline LinkLabel classify_link_label(double confidence) {
  if (!(confidence >= 0.0 && confidence <= 1.0)) {
    throw Error(ErrorCode::invalid_confidence,
                "confidence " + std::to_string(confidence) + " outside [0,1]");
  }
  return confidence == 1.0 ? LinkLabel::used : LinkLabel::mentioned;
}

inline std::string make_link_id(std::string_view from, std::string_view to, LinkMethod method) {
  Fnv1a h;
  h.update(from);
  h.update("\x1f");
  h.update(to);
  h.update("\x1f");
  h.update(to_string(method));
  return "link-" + h.hex();
}

// --- record lookup ---------------------------------------------------------

// Non-owning index over records: canonical ids, ids merged away during
// deduplication, and normalized external ids. Referenced records must
// outlive the directory and must not move.
class RecordDirectory {
 public:
  void add(const Record& r) {
    by_id_[r.id] = &r;
    for (const auto& old : r.merged_from) redirects_[old] = r.id;
    for (const auto& [scheme, value] : r.external_ids) {
      by_external_.try_emplace(external_key(scheme, value), r.id);
    }
  }

  template <typename Map>
  void add_all(const Map& records) {
    for (const auto& [id, rec] : records) add(rec);
  }

  const Record* find(std::string_view id) const {
    auto it = by_id_.find(std::string(id));
    if (it != by_id_.end()) return it->second;
    auto red = redirects_.find(std::string(id));
    if (red != redirects_.end()) {
      auto target = by_id_.find(red->second);
      if (target != by_id_.end()) return target->second;
    }
    return nullptr;
  }

  // Endpoint is `{scheme}:{value}` for a known scheme, else an internal id.
  const Record* resolve_endpoint(std::string_view endpoint) const {
    const auto colon = endpoint.find(':');
    if (colon != std::string_view::npos) {
      if (auto scheme = parse_id_scheme(endpoint.substr(0, colon))) {
        std::string value;
        try {
          value = normalize_identifier(*scheme, endpoint.substr(colon + 1));
        } catch (const Error&) {
          return nullptr;
        }
        auto it = by_external_.find(external_key(*scheme, value));
        return it == by_external_.end() ? nullptr : find(it->second);
      }
    }
    return find(endpoint);
  }

  std::size_t size() const { return by_id_.size(); }

  const std::map<std::string, const Record*>& records() const { return by_id_; }

 private:
  static std::string external_key(IdScheme scheme, std::string_view value) {
    std::string key(to_string(scheme));
    key += ':';
    key += value;
    return key;
  }

  std::map<std::string, const Record*> by_id_;
  std::unordered_map<std::string, std::string> redirects_;
  std::unordered_map<std::string, std::string> by_external_;
};

// --- literature pool -------------------------------------------------------

struct ReferenceMetadata {
  std::string title;
  std::optional<int> year;
  std::vector<std::string> creators;
  std::optional<std::string> doi;
};

inline constexpr std::string_view kPoolSource = "pool";

// Publication entities created for references that matched nothing known.
// Existing catalogue publications can be registered for matching with
// `seed`; they are not owned and do not count toward size().
class LiteraturePool {
 public:
  LiteraturePool() = default;

  explicit LiteraturePool(std::map<std::string, Record> records) : records_(std::move(records)) {
    for (const auto& [id, rec] : records_) {
      index(rec);
      if (id.starts_with("pool-")) {
        try {
          next_ = std::max<std::uint64_t>(next_, std::stoull(id.substr(5)) + 1);
        } catch (const std::exception&) {
        }
      }
    }
  }

  void seed(const Record& r) { index(r); }

  std::optional<std::string> match(const ReferenceMetadata& ref) const {
    if (ref.doi) {
      try {
        auto it = by_doi_.find(normalize_identifier(IdScheme::doi, *ref.doi));
        if (it != by_doi_.end()) return it->second;
      } catch (const Error&) {
      }
    }
    if (!text::trim(ref.title).empty()) {
      auto it = by_composite_.find(reference_key(ref));
      if (it != by_composite_.end()) return it->second;
    }
    return std::nullopt;
  }

  std::string create(const ReferenceMetadata& ref) {
    Record r;
    r.id = "pool-" + std::to_string(next_++);
    r.category = Category::publication;
    r.source = std::string(kPoolSource);
    r.creators = ref.creators;
    r.year = ref.year;
    if (ref.doi) r.external_ids[IdScheme::doi] = normalize_identifier(IdScheme::doi, *ref.doi);
    r.title = !text::trim(ref.title).empty() ? std::string(text::trim(ref.title))
                                              : "doi:" + r.external_ids[IdScheme::doi];
    index(r);
    const std::string id = r.id;
    records_.emplace(id, std::move(r));
    return id;
  }

  std::size_t size() const { return records_.size(); }
  const std::map<std::string, Record>& records() const { return records_; }

 private:
  static std::string reference_key(const ReferenceMetadata& ref) {
    return composite_key(ref.title, ref.year,
                         ref.creators.empty() ? std::string_view{} : ref.creators.front());
  }

  void index(const Record& r) {
    if (auto it = r.external_ids.find(IdScheme::doi); it != r.external_ids.end()) {
      by_doi_.try_emplace(it->second, r.id);
    }
    by_composite_.try_emplace(
        composite_key(r.title, r.year, r.creators.empty() ? std::string_view{} : r.creators.front()),
        r.id);
  }

  std::map<std::string, Record> records_;
  std::unordered_map<std::string, std::string> by_doi_;
  std::unordered_map<std::string, std::string> by_composite_;
  std::uint64_t next_ = 1;
};

inline std::string resolve_publication_reference(const ReferenceMetadata& ref,
                                                 LiteraturePool& pool) {
  const bool has_doi = ref.doi && !text::trim(*ref.doi).empty();
  if (!has_doi && text::trim(ref.title).empty()) {
    throw Error(ErrorCode::unresolvable_reference, "reference has neither title nor DOI");
  }
  if (auto hit = pool.match(ref)) return *hit;
  if (!has_doi) {
    ReferenceMetadata copy = ref;
    copy.doi.reset();
    return pool.create(copy);
  }
  return pool.create(ref);
}

// --- import ----------------------------------------------------------------

struct LinkReject {
  std::size_t line = 0;
  std::string reason;
  std::string detail;
};

struct ImportResult {
  std::vector<Link> links;
  std::vector<LinkReject> rejects;
};

struct ImportContext {
  const RecordDirectory* directory = nullptr;
  LiteraturePool* pool = nullptr;  // optional; enables match-or-create
  Timestamp imported_at{};
};

namespace detail {

inline std::optional<ReferenceMetadata> reference_from_json(const json& j) {
  if (!j.is_object()) return std::nullopt;
  ReferenceMetadata ref;
  if (j.contains("title") && j["title"].is_string()) ref.title = j["title"].get<std::string>();
  if (j.contains("year") && j["year"].is_number_integer()) ref.year = j["year"].get<int>();
  if (j.contains("creators") && j["creators"].is_array()) {
    for (const auto& c : j["creators"]) {
      if (c.is_string()) ref.creators.push_back(c.get<std::string>());
    }
  }
  if (j.contains("doi") && j["doi"].is_string()) ref.doi = j["doi"].get<std::string>();
  return ref;
}

struct Endpoint {
  std::string id;
  Category category = Category::publication;
};

// Resolves `from`/`to` (or `from_ref`/`to_ref`) of an import row.
inline std::optional<Endpoint> resolve_row_endpoint(const json& row, const std::string& side,
                                                    const ImportContext& ctx, std::string& why) {
  auto pool_endpoint = [&](const std::string& id) -> std::optional<Endpoint> {
    return Endpoint{id, Category::publication};
  };
  if (row.contains(side) && row[side].is_string()) {
    const std::string endpoint = row[side].get<std::string>();
    if (ctx.directory) {
      if (const Record* r = ctx.directory->resolve_endpoint(endpoint)) {
        return Endpoint{r->id, r->category};
      }
    }
    if (ctx.pool) {
      if (ctx.pool->records().contains(endpoint)) return pool_endpoint(endpoint);
      if (endpoint.starts_with("doi:")) {
        ReferenceMetadata ref;
        ref.doi = endpoint.substr(4);
        try {
          return pool_endpoint(resolve_publication_reference(ref, *ctx.pool));
        } catch (const Error& e) {
          why = e.what();
          return std::nullopt;
        }
      }
    }
    why = "unknown endpoint '" + endpoint + "'";
    return std::nullopt;
  }
  const std::string ref_field = side + "_ref";
  if (row.contains(ref_field) && ctx.pool) {
    auto ref = reference_from_json(row[ref_field]);
    if (!ref) {
      why = ref_field + " is not an object";
      return std::nullopt;
    }
    if (ctx.directory && ref->doi) {
      if (const Record* r = ctx.directory->resolve_endpoint("doi:" + *ref->doi)) {
        return Endpoint{r->id, r->category};
      }
    }
    try {
      return pool_endpoint(resolve_publication_reference(*ref, *ctx.pool));
    } catch (const Error& e) {
      why = e.what();
      return std::nullopt;
    }
  }
  why = "missing '" + side + "'";
  return std::nullopt;
}

}  // namespace detail

inline ImportResult import_link_records(const std::vector<std::string>& lines,
                                        const std::string& origin, const ImportContext& ctx) {
  if (origin.empty()) throw Error(ErrorCode::invalid_argument, "link origin must be non-empty");
  ImportResult out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (io::is_blank(lines[i])) continue;
    const std::size_t line_no = i + 1;
    auto reject = [&](std::string reason, std::string detail) {
      out.rejects.push_back({line_no, std::move(reason), std::move(detail)});
    };
    json row;
    try {
      row = json::parse(lines[i]);
    } catch (const json::exception& e) {
      reject("malformed", e.what());
      continue;
    }
    if (!row.is_object()) {
      reject("malformed", "line is not an object");
      continue;
    }
    const auto method =
        row.contains("method") && row["method"].is_string()
            ? parse_method(row["method"].get<std::string>())
            : std::nullopt;
    if (!method) {
      reject("invalid-method", row.value("method", json()).dump());
      continue;
    }
    double confidence = 1.0;
    if (row.contains("confidence")) {
      if (!row["confidence"].is_number()) {
        reject("invalid-confidence", row["confidence"].dump());
        continue;
      }
      confidence = row["confidence"].get<double>();
      if (!(confidence >= 0.0 && confidence <= 1.0)) {
        reject("invalid-confidence", row["confidence"].dump());
        continue;
      }
    } else if (*method == LinkMethod::automatic) {
      reject("invalid-confidence", "automatic link without confidence");
      continue;
    }
    if (*method == LinkMethod::manual) confidence = 1.0;

    std::string why;
    auto from = detail::resolve_row_endpoint(row, "from", ctx, why);
    if (!from) {
      reject("unresolved-endpoint", why);
      continue;
    }
    auto to = detail::resolve_row_endpoint(row, "to", ctx, why);
    if (!to) {
      reject("unresolved-endpoint", why);
      continue;
    }
    if (from->id == to->id) {
      reject("self-link", from->id);
      continue;
    }

    Link link;
    link.from_id = from->id;
    link.to_id = to->id;
    link.from_category = from->category;
    link.to_category = to->category;
    link.method = *method;
    link.confidence = confidence;
    link.label = classify_link_label(confidence);
    link.id = make_link_id(link.from_id, link.to_id, link.method);
    if (row.contains("passage") && row["passage"].is_string()) {
      link.evidence_passage = row["passage"].get<std::string>();
    }
    ProvenanceEntry prov{origin, *method, ctx.imported_at, std::nullopt};
    if (row.contains("note") && row["note"].is_string()) prov.note = row["note"].get<std::string>();
    link.provenance.push_back(std::move(prov));
    out.links.push_back(std::move(link));
  }
  return out;
}

// --- merge -----------------------------------------------------------------

// Collapses links sharing (from, to, method). Output is ordered by that key.
inline std::vector<Link> merge_duplicate_links(const std::vector<Link>& links) {
  using Key = std::tuple<std::string_view, std::string_view, LinkMethod>;
  std::map<Key, std::vector<const Link*>> groups;
  for (const auto& l : links) groups[{l.from_id, l.to_id, l.method}].push_back(&l);

  std::vector<Link> out;
  out.reserve(groups.size());
  for (const auto& [key, members] : groups) {
    Link merged = *members.front();
    const Link* best = members.front();
    for (const Link* m : members) {
      if (m->confidence > best->confidence) best = m;
    }
    merged.confidence = best->confidence;
    merged.evidence_passage = best->evidence_passage;
    merged.label = classify_link_label(merged.confidence);
    merged.id = make_link_id(merged.from_id, merged.to_id, merged.method);
    merged.provenance.clear();
    std::set<std::pair<std::string, std::optional<std::string>>> seen;
    for (const Link* m : members) {
      for (const auto& p : m->provenance) {
        if (seen.emplace(p.origin, p.note).second) merged.provenance.push_back(p);
      }
    }
    out.push_back(std::move(merged));
  }
  return out;
}

// --- summaries -------------------------------------------------------------

struct LinkedItem {
  std::string record_id;
  Category category = Category::publication;
  std::string title;
  LinkLabel label = LinkLabel::used;
  double confidence = 1.0;
  std::optional<std::string> evidence_passage;
  LinkMethod method = LinkMethod::manual;
  bool outgoing = true;  // this record is the link's `from` side
  std::vector<std::string> origins;
  std::string link_id;
};

struct LinkSummary {
  std::string record_id;
  std::map<Category, std::size_t> category_counts;
  std::size_t used = 0;
  std::size_t mentioned = 0;
  std::vector<LinkedItem> items;

  std::size_t count(Category c) const {
    auto it = category_counts.find(c);
    return it == category_counts.end() ? 0 : it->second;
  }
  std::size_t total() const { return items.size(); }
};

struct DanglingLink {
  std::string link_id;
  std::string from_id;
  std::string to_id;
  std::string reason;
};

struct SummaryBuild {
  std::map<std::string, LinkSummary> summaries;  // one per known record
  std::vector<Link> live_links;                  // canonical endpoints, merged
  std::vector<DanglingLink> dangling;
};

// Rewrites endpoints to surviving record ids and drops links whose
// endpoints no longer exist.
inline std::vector<Link> canonicalize_links(const std::vector<Link>& links,
                                            const RecordDirectory& dir,
                                            std::vector<DanglingLink>& dangling) {
  std::vector<Link> live;
  live.reserve(links.size());
  for (const auto& l : links) {
    const Record* from = dir.find(l.from_id);
    const Record* to = dir.find(l.to_id);
    if (!from || !to) {
      dangling.push_back({l.id, l.from_id, l.to_id,
                          !from ? "missing-from:" + l.from_id : "missing-to:" + l.to_id});
      continue;
    }
    if (from->id == to->id) {
      dangling.push_back({l.id, l.from_id, l.to_id, "self-link-after-merge"});
      continue;
    }
    Link c = l;
    c.from_id = from->id;
    c.to_id = to->id;
    c.from_category = from->category;
    c.to_category = to->category;
    c.id = make_link_id(c.from_id, c.to_id, c.method);
    live.push_back(std::move(c));
  }
  return merge_duplicate_links(live);
}

inline bool linked_item_before(const LinkedItem& a, const LinkedItem& b) {
  const int la = a.label == LinkLabel::used ? 0 : 1;
  const int lb = b.label == LinkLabel::used ? 0 : 1;
  if (la != lb) return la < lb;
  if (a.confidence != b.confidence) return a.confidence > b.confidence;
  if (a.title != b.title) return a.title < b.title;
  if (a.record_id != b.record_id) return a.record_id < b.record_id;
  return a.link_id < b.link_id;
}

inline SummaryBuild build_link_summaries(const RecordDirectory& dir,
                                         const std::vector<Link>& links) {
  SummaryBuild out;
  out.live_links = canonicalize_links(links, dir, out.dangling);
  for (const auto& [id, rec] : dir.records()) out.summaries[id].record_id = id;

  auto origins_of = [](const Link& l) {
    std::vector<std::string> o;
    for (const auto& p : l.provenance) o.push_back(p.origin);
    std::sort(o.begin(), o.end());
    o.erase(std::unique(o.begin(), o.end()), o.end());
    return o;
  };
  auto attach = [&](const std::string& owner, const Record& other, const Link& l, bool outgoing) {
    auto& s = out.summaries[owner];
    s.items.push_back({other.id, other.category, other.title, l.label, l.confidence,
                       l.evidence_passage, l.method, outgoing, origins_of(l), l.id});
    ++s.category_counts[other.category];
    ++(l.label == LinkLabel::used ? s.used : s.mentioned);
  };
  for (const auto& l : out.live_links) {
    const Record* from = dir.find(l.from_id);
    const Record* to = dir.find(l.to_id);
    attach(from->id, *to, l, true);
    attach(to->id, *from, l, false);
  }
  for (auto& [id, s] : out.summaries) {
    std::sort(s.items.begin(), s.items.end(), linked_item_before);
  }
  return out;
}

// --- canonical JSON --------------------------------------------------------

inline json link_to_json(const Link& l) {
  json prov = json::array();
  for (const auto& p : l.provenance) {
    json e = {{"origin", p.origin},
              {"method", to_string(p.method)},
              {"imported_at", format_timestamp(p.imported_at)}};
    if (p.note) e["note"] = *p.note;
    prov.push_back(std::move(e));
  }
  json j = {{"id", l.id},
            {"from", l.from_id},
            {"to", l.to_id},
            {"from_category", to_string(l.from_category)},
            {"to_category", to_string(l.to_category)},
            {"method", to_string(l.method)},
            {"confidence", l.confidence},
            {"label", to_string(l.label)},
            {"provenance", std::move(prov)}};
  if (l.evidence_passage) j["passage"] = *l.evidence_passage;
  return j;
}

inline Link link_from_json(const json& j) {
  try {
    Link l;
    l.from_id = j.at("from").get<std::string>();
    l.to_id = j.at("to").get<std::string>();
    auto fc = parse_category(j.at("from_category").get<std::string>());
    auto tc = parse_category(j.at("to_category").get<std::string>());
    auto m = parse_method(j.at("method").get<std::string>());
    if (!fc || !tc || !m) throw Error(ErrorCode::artifact_corrupt, "bad link enum value");
    l.from_category = *fc;
    l.to_category = *tc;
    l.method = *m;
    l.confidence = j.at("confidence").get<double>();
    l.label = classify_link_label(l.confidence);
    l.id = make_link_id(l.from_id, l.to_id, l.method);
    if (j.contains("passage")) l.evidence_passage = j["passage"].get<std::string>();
    for (const auto& p : j.at("provenance")) {
      ProvenanceEntry e;
      e.origin = p.at("origin").get<std::string>();
      auto pm = parse_method(p.at("method").get<std::string>());
      auto ts = parse_timestamp(p.at("imported_at").get<std::string>());
      if (!pm || !ts || e.origin.empty()) {
        throw Error(ErrorCode::artifact_corrupt, "bad provenance entry");
      }
      e.method = *pm;
      e.imported_at = *ts;
      if (p.contains("note")) e.note = p["note"].get<std::string>();
      l.provenance.push_back(std::move(e));
    }
    if (l.provenance.empty()) throw Error(ErrorCode::artifact_corrupt, "link without provenance");
    return l;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::artifact_corrupt, std::string("malformed link: ") + e.what());
  }
}

inline std::string serialize_links(const std::vector<Link>& links) {
  std::string out;
  for (const auto& l : links) {
    out += link_to_json(l).dump();
    out += '\n';
  }
  return out;
}

inline std::vector<Link> read_links_file(const fs::path& path) {
  std::vector<Link> links;
  const auto lines = io::split_lines(io::read_file(path));
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (io::is_blank(lines[i])) continue;
    try {
      links.push_back(link_from_json(json::parse(lines[i])));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::artifact_corrupt,
                  path.string() + ":" + std::to_string(i + 1) + ": " + e.what());
    }
  }
  return links;
}

inline json dangling_to_json(const std::vector<DanglingLink>& dangling) {
  json items = json::array();
  for (const auto& d : dangling) {
    items.push_back({{"link_id", d.link_id}, {"from", d.from_id}, {"to", d.to_id},
                     {"reason", d.reason}});
  }
  return {{"count", dangling.size()}, {"links", std::move(items)}};
}

inline json linked_item_to_json(const LinkedItem& it) {
  json j = {{"record_id", it.record_id},
            {"category", to_string(it.category)},
            {"title", it.title},
            {"label", to_string(it.label)},
            {"confidence", it.confidence},
            {"method", to_string(it.method)},
            {"direction", it.outgoing ? "outgoing" : "incoming"},
            {"origins", it.origins},
            {"link_id", it.link_id}};
  if (it.evidence_passage) j["passage"] = *it.evidence_passage;
  return j;
}

inline json summary_to_json(const LinkSummary& s) {
  json counts = json::object();
  for (Category c : kAllCategories) counts[std::string(to_string(c))] = s.count(c);
  json items = json::array();
  for (const auto& it : s.items) items.push_back(linked_item_to_json(it));
  return {{"record_id", s.record_id},
          {"counts", std::move(counts)},
          {"labels", {{"used", s.used}, {"mentioned", s.mentioned}}},
          {"items", std::move(items)}};
}

inline LinkSummary summary_from_json(const json& j) {
  try {
    LinkSummary s;
    s.record_id = j.at("record_id").get<std::string>();
    for (const auto& [name, n] : j.at("counts").items()) {
      auto c = parse_category(name);
      if (!c) throw Error(ErrorCode::artifact_corrupt, "bad category " + name);
      if (n.get<std::size_t>() > 0) s.category_counts[*c] = n.get<std::size_t>();
    }
    s.used = j.at("labels").at("used").get<std::size_t>();
    s.mentioned = j.at("labels").at("mentioned").get<std::size_t>();
    for (const auto& it : j.at("items")) {
      LinkedItem item;
      item.record_id = it.at("record_id").get<std::string>();
      auto c = parse_category(it.at("category").get<std::string>());
      auto m = parse_method(it.at("method").get<std::string>());
      if (!c || !m) throw Error(ErrorCode::artifact_corrupt, "bad linked item");
      item.category = *c;
      item.method = *m;
      item.title = it.at("title").get<std::string>();
      item.confidence = it.at("confidence").get<double>();
      item.label = classify_link_label(item.confidence);
      item.outgoing = it.at("direction").get<std::string>() == "outgoing";
      item.origins = it.at("origins").get<std::vector<std::string>>();
      item.link_id = it.at("link_id").get<std::string>();
      if (it.contains("passage")) item.evidence_passage = it["passage"].get<std::string>();
      s.items.push_back(std::move(item));
    }
    return s;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::artifact_corrupt, std::string("malformed summary: ") + e.what());
  }
}

}  // namespace datanexus::links
