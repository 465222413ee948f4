#pragma once
// HTTP/JSON facade. Handlers are plain functions over an immutable Catalog
// so they can be exercised without a socket; ApiServer wires them to routes.

#include <atomic>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>

#include "httplib.h"

#include "datanexus/analytics.hpp"
#include "datanexus/catalog.hpp"

namespace datanexus::api {

using Params = std::multimap<std::string, std::string>;

struct ApiResponse {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;

  json json_body() const { return json::parse(body); }
};

struct ApiError {
  int status;
  std::string code;
  std::string message;
};

inline ApiResponse error_response(const ApiError& e) {
  return {e.status, "application/json",
          json{{"error", {{"status", e.status}, {"code", e.code}, {"message", e.message}}}}.dump()};
}

inline ApiResponse json_response(const json& body, int status = 200) {
  return {status, "application/json", body.dump()};
}

namespace detail {

inline std::optional<std::string> param(const Params& p, const std::string& key) {
  auto it = p.find(key);
  if (it == p.end()) return std::nullopt;
  return it->second;
}

inline std::optional<std::size_t> parse_size(std::string_view s) {
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

inline ApiError no_snapshot() { return {503, "no-snapshot", "no snapshot loaded"}; }

inline ApiError not_found(std::string_view id) {
  return {404, "not-found", "unknown record '" + std::string(id) + "'"};
}

inline json category_counts(const links::LinkSummary* s) {
  json counts = json::object();
  for (Category c : kAllCategories) counts[std::string(to_string(c))] = s ? s->count(c) : 0;
  return counts;
}

inline json material_list(const Record& r) {
  json mats = json::array();
  for (const auto& m : r.materials) mats.push_back({{"kind", to_string(m.kind)}, {"url", m.url}});
  return mats;
}

}  // namespace detail

// GET /api/search?q=&type=&year=&source=&language=&from=&size=
inline ApiResponse handle_search(const Catalog* catalog, const Params& params) {
  if (!catalog) return error_response(detail::no_snapshot());
  search::SearchQuery q;
  const std::string text = detail::param(params, "q").value_or("");
  q.terms = {text};
  const std::string type = detail::param(params, "type").value_or("all");
  try {
    q.category = parse_category_filter(type);
  } catch (const Error&) {
    return error_response({400, "invalid-category", "unknown type '" + type + "'"});
  }
  if (auto from = detail::param(params, "from")) {
    auto v = detail::parse_size(*from);
    if (!v) return error_response({400, "invalid-parameter", "from must be a non-negative integer"});
    q.offset = *v;
  }
  if (auto size = detail::param(params, "size")) {
    auto v = detail::parse_size(*size);
    if (!v || *v < 1 || *v > search::kMaxLimit) {
      return error_response({400, "invalid-size", "size must be an integer in [1, 100]"});
    }
    q.limit = *v;
  }
  for (auto field : search::kFacetFields) {
    auto [lo, hi] = params.equal_range(std::string(field));
    for (auto it = lo; it != hi; ++it) {
      if (!it->second.empty()) q.facet_filters[std::string(field)].insert(it->second);
    }
  }

  const auto result = search::execute_query(catalog->index(), q);
  json totals = json::object();
  for (const auto& [c, n] : result.total_by_category) totals[std::string(to_string(c))] = n;
  json hits = json::array();
  for (const auto& h : result.hits) {
    const Record* r = catalog->find(h.record_id);
    if (!r) continue;
    const auto* s = catalog->summary(r->id);
    json hit = {{"id", r->id},
                {"category", to_string(r->category)},
                {"title", r->title},
                {"creators", r->creators},
                {"source", r->source},
                {"score", h.score},
                {"snippet", search::make_snippet(*r, result.terms)},
                {"materials", detail::material_list(*r)},
                {"link_counts", detail::category_counts(s)},
                {"links_total", s ? s->total() : 0}};
    hit["year"] = r->year ? json(*r->year) : json(nullptr);
    hits.push_back(std::move(hit));
  }
  json facets = json::object();
  for (auto field : search::kFacetFields) {
    auto it = result.facets.find(std::string(field));
    facets[std::string(field)] = it == result.facets.end() ? json::object() : json(it->second);
  }
  return json_response({{"query", text},
                        {"terms", result.terms},
                        {"type", type},
                        {"from", q.offset},
                        {"size", q.limit},
                        {"total", result.total},
                        {"totals", std::move(totals)},
                        {"hits", std::move(hits)},
                        {"facets", std::move(facets)}});
}

// GET /api/record/{id}
inline ApiResponse handle_record(const Catalog* catalog, std::string_view id) {
  if (!catalog) return error_response(detail::no_snapshot());
  const Record* r = catalog->find(id);
  if (!r) return error_response(detail::not_found(id));
  const auto* s = catalog->summary(r->id);
  json rec = record_to_json(*r);
  rec.erase("full_text");
  const std::size_t total = s ? s->total() : 0;
  return json_response({{"record", std::move(rec)},
                        {"has_full_text", r->full_text.has_value()},
                        {"materials", detail::material_list(*r)},
                        {"link_counts", detail::category_counts(s)},
                        {"label_counts", {{"used", s ? s->used : 0}, {"mentioned", s ? s->mentioned : 0}}},
                        {"links_total", total},
                        {"link_boxes_omitted", total == 0}});
}

// GET /api/record/{id}/links?type=
inline ApiResponse handle_record_links(const Catalog* catalog, std::string_view id,
                                       const Params& params) {
  if (!catalog) return error_response(detail::no_snapshot());
  const Record* r = catalog->find(id);
  if (!r) return error_response(detail::not_found(id));
  const std::string type = detail::param(params, "type").value_or("all");
  CategoryFilter filter;
  try {
    filter = parse_category_filter(type);
  } catch (const Error&) {
    return error_response({400, "invalid-category", "unknown type '" + type + "'"});
  }
  json items = json::array();
  if (const auto* s = catalog->summary(r->id)) {
    for (const auto& item : s->items) {
      if (!filter || item.category == *filter) items.push_back(links::linked_item_to_json(item));
    }
  }
  const std::size_t count = items.size();
  return json_response({{"record_id", r->id}, {"type", type}, {"count", count},
                        {"items", std::move(items)}});
}

// --- citations -------------------------------------------------------------

inline constexpr std::array<std::string_view, 4> kCitationFormats = {"bibtex", "ris", "endnote",
                                                                     "apa_text"};

inline std::optional<std::string> render_citation(const Record& r, std::string_view format) {
  const auto doi = r.external_ids.find(IdScheme::doi);
  const bool has_doi = doi != r.external_ids.end();
  if (format == "bibtex") {
    std::string s = "@misc{" + r.id + ", title={" + r.title + "}";
    if (!r.creators.empty()) {
      s += ", author={";
      for (std::size_t i = 0; i < r.creators.size(); ++i) {
        if (i) s += " and ";
        s += r.creators[i];
      }
      s += "}";
    }
    if (r.year) s += ", year={" + std::to_string(*r.year) + "}";
    if (has_doi) s += ", doi={" + doi->second + "}";
    return s + "}\n";
  }
  if (format == "ris") {
    std::string s = r.category == Category::research_data ? "TY  - DATA\n" : "TY  - GEN\n";
    s += "TI  - " + r.title + "\n";
    for (const auto& c : r.creators) s += "AU  - " + c + "\n";
    if (r.year) s += "PY  - " + std::to_string(*r.year) + "\n";
    if (has_doi) s += "DO  - " + doi->second + "\n";
    return s + "ER  - \n";
  }
  if (format == "endnote") {
    std::string s = r.category == Category::research_data ? "%0 Dataset\n" : "%0 Generic\n";
    s += "%T " + r.title + "\n";
    for (const auto& c : r.creators) s += "%A " + c + "\n";
    if (r.year) s += "%D " + std::to_string(*r.year) + "\n";
    if (has_doi) s += "%R " + doi->second + "\n";
    return s;
  }
  if (format == "apa_text") {
    std::string s;
    if (!r.creators.empty()) {
      for (std::size_t i = 0; i < r.creators.size(); ++i) {
        if (i) s += (i + 1 == r.creators.size()) ? ", & " : ", ";
        s += r.creators[i];
      }
      if (!s.ends_with('.')) s += '.';
      s += ' ';
    }
    if (r.year) s += "(" + std::to_string(*r.year) + "). ";
    s += r.title;
    if (!s.ends_with('.')) s += '.';
    if (!r.source.empty()) s += " " + r.source + ".";
    if (has_doi) s += " https://doi.org/" + doi->second;
    return s + "\n";
  }
  return std::nullopt;
}

// GET /api/record/{id}/citation?format=
inline ApiResponse handle_citation_export(const Catalog* catalog, std::string_view id,
                                          const Params& params) {
  if (!catalog) return error_response(detail::no_snapshot());
  const Record* r = catalog->find(id);
  if (!r) return error_response(detail::not_found(id));
  const std::string format = detail::param(params, "format").value_or("");
  auto text = render_citation(*r, format);
  if (!text) return error_response({400, "invalid-format", "unknown citation format '" + format + "'"});
  return {200, "text/plain; charset=utf-8", std::move(*text)};
}

// --- event intake ----------------------------------------------------------

// Append-only JSON-lines event log with a single serialized writer.
class EventLog {
 public:
  explicit EventLog(std::filesystem::path path) : path_(std::move(path)) {
    if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
    out_.open(path_, std::ios::app | std::ios::binary);
    if (!out_) throw Error(ErrorCode::artifact_missing, "cannot open event log " + path_.string());
  }

  void append(const std::string& line) {
    std::lock_guard lock(mutex_);
    out_ << line << '\n';
    out_.flush();
    ++written_;
  }

  std::size_t written() const {
    std::lock_guard lock(mutex_);
    return written_;
  }

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  mutable std::mutex mutex_;
  std::ofstream out_;
  std::size_t written_ = 0;
};

// POST /api/log
inline ApiResponse handle_log_event(std::string_view body, const analytics::ActionVocabulary& vocabulary,
                                    EventLog& log, Timestamp received_at) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::exception&) {
    return error_response({400, "invalid-json", "body is not valid JSON"});
  }
  auto v = analytics::event_from_json(j, vocabulary, received_at);
  if (!v.event) {
    std::string code = "invalid-event";
    if (v.code == ErrorCode::unknown_action) code = "unknown-action";
    if (v.error == "missing client_id") code = "missing-client-id";
    if (v.code == ErrorCode::invalid_category) code = "invalid-category";
    return error_response({400, code, v.error});
  }
  log.append(analytics::event_to_json(*v.event).dump());
  return json_response({{"status", "accepted"}, {"timestamp", format_timestamp(v.event->timestamp)}},
                       202);
}

// GET /api/stats
inline ApiResponse handle_stats(const Catalog* catalog) {
  if (!catalog) return error_response(detail::no_snapshot());
  std::map<Category, std::size_t> per_category;
  for (Category c : kAllCategories) per_category[c] = 0;
  for (const auto& [id, rec] : catalog->directory().records()) ++per_category[rec->category];
  json records = json::object();
  for (const auto& [c, n] : per_category) records[std::string(to_string(c))] = n;

  // Each link is listed once as an outgoing item of its `from` record.
  std::map<std::tuple<Category, Category, links::LinkMethod>, std::size_t> pairs;
  std::size_t link_total = 0;
  for (const auto& [id, s] : catalog->summaries()) {
    const Record* owner = catalog->find(id);
    if (!owner) continue;
    for (const auto& item : s.items) {
      if (!item.outgoing) continue;
      ++link_total;
      Category a = owner->category;
      Category b = item.category;
      if (b < a) std::swap(a, b);
      ++pairs[{a, b, item.method}];
    }
  }
  json pair_rows = json::array();
  for (const auto& [key, n] : pairs) {
    pair_rows.push_back({{"a", to_string(std::get<0>(key))},
                         {"b", to_string(std::get<1>(key))},
                         {"method", links::to_string(std::get<2>(key))},
                         {"count", n}});
  }
  return json_response({{"built_at", format_timestamp(catalog->built_at())},
                        {"records", std::move(records)},
                        {"record_total", catalog->directory().size()},
                        {"pool_records", catalog->pool().size()},
                        {"links", {{"total", link_total}, {"pairs", std::move(pair_rows)}}},
                        {"dangling_links", catalog->dangling().size()}});
}

inline ApiResponse handle_health(const Catalog* catalog) {
  return json_response({{"status", "ok"}, {"snapshot_loaded", catalog != nullptr}});
}

// --- server ----------------------------------------------------------------

struct ServerConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::filesystem::path event_log = "events.jsonl";
  analytics::ActionVocabulary vocabulary = analytics::ActionVocabulary::defaults();
};

class ApiServer {
 public:
  explicit ApiServer(ServerConfig config)
      : config_(std::move(config)), log_(config_.event_log) {
    routes();
  }

  ~ApiServer() { stop(); }

  // Readers holding the previous catalog keep it alive until they finish.
  void set_catalog(std::shared_ptr<const Catalog> catalog) {
    std::atomic_store(&catalog_, std::move(catalog));
  }

  std::shared_ptr<const Catalog> catalog() const { return std::atomic_load(&catalog_); }

  void reload(const std::filesystem::path& artifacts) { set_catalog(Catalog::load(artifacts)); }

  // Binds an ephemeral port; returns it. Call run() to serve.
  int bind_any_port() { return server_.bind_to_any_port(config_.host); }
  bool bind(int port) { return server_.bind_to_port(config_.host, port); }
  bool run() { return server_.listen_after_bind(); }
  bool listen() { return server_.listen(config_.host, config_.port); }
  void stop() { server_.stop(); }
  void wait_until_ready() const { server_.wait_until_ready(); }

  EventLog& event_log() { return log_; }

 private:
  static Params params_of(const httplib::Request& req) {
    return Params(req.params.begin(), req.params.end());
  }

  static void send(httplib::Response& res, const ApiResponse& r) {
    res.status = r.status;
    res.set_content(r.body, r.content_type);
  }

  void routes() {
    server_.Get("/api/search", [this](const httplib::Request& req, httplib::Response& res) {
      auto c = catalog();
      send(res, handle_search(c.get(), params_of(req)));
    });
    server_.Get(R"(/api/record/([^/]+)/links)", [this](const httplib::Request& req, httplib::Response& res) {
      auto c = catalog();
      send(res, handle_record_links(c.get(), req.matches[1].str(), params_of(req)));
    });
    server_.Get(R"(/api/record/([^/]+)/citation)", [this](const httplib::Request& req, httplib::Response& res) {
      auto c = catalog();
      send(res, handle_citation_export(c.get(), req.matches[1].str(), params_of(req)));
    });
    server_.Get(R"(/api/record/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      auto c = catalog();
      send(res, handle_record(c.get(), req.matches[1].str()));
    });
    server_.Post("/api/log", [this](const httplib::Request& req, httplib::Response& res) {
      send(res, handle_log_event(req.body, config_.vocabulary, log_, now_timestamp()));
    });
    server_.Get("/api/stats", [this](const httplib::Request&, httplib::Response& res) {
      auto c = catalog();
      send(res, handle_stats(c.get()));
    });
    server_.Get("/api/health", [this](const httplib::Request&, httplib::Response& res) {
      auto c = catalog();
      send(res, handle_health(c.get()));
    });
  }

  ServerConfig config_;
  EventLog log_;
  std::shared_ptr<const Catalog> catalog_;
  httplib::Server server_;
};

}  // namespace datanexus::api
