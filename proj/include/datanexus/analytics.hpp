#pragma once
// Usage-log analysis: event parsing, sessionization, positive-signal
// classification, and the usage report (category shares, first actions,
// session success, action paths, link-section usage and link directions).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "datanexus/io.hpp"
#include "datanexus/model.hpp"
#include "datanexus/timestamp.hpp"

namespace datanexus::analytics {

enum class SignalGroup {
  dataset_materials_download,
  fulltext_direct_download,
  fulltext_external,
  export_citation,
  goto_specialized_portal,
  view_linked_resources,
};

inline std::string_view to_string(SignalGroup g) {
  switch (g) {
    case SignalGroup::dataset_materials_download: return "dataset_materials_download";
    case SignalGroup::fulltext_direct_download: return "fulltext_direct_download";
    case SignalGroup::fulltext_external: return "fulltext_external";
    case SignalGroup::export_citation: return "export_citation";
    case SignalGroup::goto_specialized_portal: return "goto_specialized_portal";
    case SignalGroup::view_linked_resources: return "view_linked_resources";
  }
  return "";
}

struct SignalAction {
  std::string_view action;
  SignalGroup group;
};

// Positive-signal actions and their groups.
inline constexpr std::array<SignalAction, 20> kSignalActions = {{
    {"dataset_popup", SignalGroup::dataset_materials_download},
    {"questionnaire_popup", SignalGroup::dataset_materials_download},
    {"otherdocs_popup", SignalGroup::dataset_materials_download},
    {"codebook_popup", SignalGroup::dataset_materials_download},
    {"fulltext_download", SignalGroup::fulltext_direct_download},
    {"goto_google_scholar", SignalGroup::fulltext_external},
    {"goto_google_books", SignalGroup::fulltext_external},
    {"export_bibtex", SignalGroup::export_citation},
    {"export_citavi", SignalGroup::export_citation},
    {"export_endnote", SignalGroup::export_citation},
    {"export_popup", SignalGroup::export_citation},
    {"export_apa", SignalGroup::export_citation},
    {"goto_zis", SignalGroup::goto_specialized_portal},
    {"goto_pretest", SignalGroup::goto_specialized_portal},
    {"goto_survey_guidelines", SignalGroup::goto_specialized_portal},
    {"goto_gml", SignalGroup::goto_specialized_portal},
    {"open_linked_resources_section", SignalGroup::view_linked_resources},
    {"goto_linked_resources", SignalGroup::view_linked_resources},
    {"click_on_linked_resource", SignalGroup::view_linked_resources},
    {"open_linked_resources", SignalGroup::view_linked_resources},
}};

inline constexpr std::array<std::string_view, 6> kBaseActions = {
    "search", "view_record", "view_record_links", "page", "change_category", "goto_fulltext"};

class ActionVocabulary {
 public:
  static ActionVocabulary defaults() {
    ActionVocabulary v;
    for (auto a : kBaseActions) v.actions_.emplace(a);
    for (const auto& s : kSignalActions) v.actions_.emplace(s.action);
    return v;
  }

  // Accepts a JSON array of names or {"actions": [...]}; extends defaults.
  static ActionVocabulary from_json(const json& j) {
    ActionVocabulary v = defaults();
    const json& list = j.is_object() ? j.at("actions") : j;
    for (const auto& a : list) v.actions_.insert(a.get<std::string>());
    return v;
  }

  bool contains(std::string_view action) const { return actions_.contains(std::string(action)); }
  const std::set<std::string>& actions() const { return actions_; }

 private:
  std::set<std::string> actions_;
};

// Group of a positive-signal action; none for any other action.
inline std::optional<SignalGroup> signal_group_of(std::string_view action) {
  for (const auto& s : kSignalActions) {
    if (s.action == action) return s.group;
  }
  return std::nullopt;
}

inline std::optional<SignalGroup> classify_signal(
    std::string_view action, const ActionVocabulary& vocabulary = ActionVocabulary::defaults()) {
  if (!vocabulary.contains(action)) {
    throw Error(ErrorCode::unknown_action, "unknown action '" + std::string(action) + "'");
  }
  return signal_group_of(action);
}

// --- events ----------------------------------------------------------------

struct UsageEvent {
  Timestamp timestamp{};
  std::string client_id;
  std::string action;
  std::optional<std::string> category;  // category name or "all"
  std::optional<std::string> record_id;
  std::optional<std::string> query;
  std::optional<bool> has_links;
  std::optional<std::string> target_record_id;
  std::optional<std::string> target_category;

  friend bool operator==(const UsageEvent&, const UsageEvent&) = default;
};

inline json event_to_json(const UsageEvent& e) {
  json j = {{"timestamp", format_timestamp(e.timestamp)},
            {"client_id", e.client_id},
            {"action", e.action}};
  if (e.category) j["category"] = *e.category;
  if (e.record_id) j["record_id"] = *e.record_id;
  if (e.query) j["query"] = *e.query;
  if (e.has_links) j["has_links"] = *e.has_links;
  if (e.target_record_id) j["target_record_id"] = *e.target_record_id;
  if (e.target_category) j["target_category"] = *e.target_category;
  return j;
}

struct EventValidation {
  std::optional<UsageEvent> event;
  ErrorCode code = ErrorCode::invalid_argument;
  std::string error;
};

// Validates one event object. A missing timestamp is filled from
// `default_time` when given, otherwise it is an error.
inline EventValidation event_from_json(const json& j, const ActionVocabulary& vocabulary,
                                       std::optional<Timestamp> default_time = std::nullopt) {
  EventValidation out;
  auto fail = [&](ErrorCode code, std::string msg) {
    out.code = code;
    out.error = std::move(msg);
    return out;
  };
  if (!j.is_object()) return fail(ErrorCode::invalid_argument, "event is not an object");
  UsageEvent e;
  if (!j.contains("client_id") || !j["client_id"].is_string() ||
      j["client_id"].get_ref<const std::string&>().empty()) {
    return fail(ErrorCode::invalid_argument, "missing client_id");
  }
  e.client_id = j["client_id"].get<std::string>();
  if (!j.contains("action") || !j["action"].is_string()) {
    return fail(ErrorCode::unknown_action, "missing action");
  }
  e.action = j["action"].get<std::string>();
  if (!vocabulary.contains(e.action)) {
    return fail(ErrorCode::unknown_action, "unknown action '" + e.action + "'");
  }
  if (j.contains("timestamp") && !j["timestamp"].is_null()) {
    const auto& ts = j["timestamp"];
    if (ts.is_number_integer()) {
      e.timestamp = timestamp_from_ms(ts.get<std::int64_t>());
    } else if (ts.is_string()) {
      auto parsed = parse_timestamp(ts.get_ref<const std::string&>());
      if (!parsed) return fail(ErrorCode::invalid_argument, "bad timestamp");
      e.timestamp = *parsed;
    } else {
      return fail(ErrorCode::invalid_argument, "bad timestamp");
    }
  } else if (default_time) {
    e.timestamp = *default_time;
  } else {
    return fail(ErrorCode::invalid_argument, "missing timestamp");
  }
  auto opt_string = [&](const char* key, std::optional<std::string>& dst) {
    if (j.contains(key) && j[key].is_string()) dst = j[key].get<std::string>();
  };
  opt_string("category", e.category);
  opt_string("record_id", e.record_id);
  opt_string("query", e.query);
  opt_string("target_record_id", e.target_record_id);
  opt_string("target_category", e.target_category);
  if (e.category && *e.category != kAllCategoriesName && !parse_category(*e.category)) {
    return fail(ErrorCode::invalid_category, "unknown category '" + *e.category + "'");
  }
  if (e.target_category && !parse_category(*e.target_category)) {
    return fail(ErrorCode::invalid_category, "unknown target_category '" + *e.target_category + "'");
  }
  if (j.contains("has_links") && j["has_links"].is_boolean()) e.has_links = j["has_links"].get<bool>();
  out.event = std::move(e);
  return out;
}

struct ParsedEvents {
  std::vector<UsageEvent> events;  // sorted by (client_id, timestamp)
  std::size_t rejected = 0;
};

inline void sort_events(std::vector<UsageEvent>& events) {
  std::stable_sort(events.begin(), events.end(), [](const UsageEvent& a, const UsageEvent& b) {
    return std::tie(a.client_id, a.timestamp) < std::tie(b.client_id, b.timestamp);
  });
}

inline ParsedEvents parse_events(const std::vector<std::string>& lines,
                                 const ActionVocabulary& vocabulary = ActionVocabulary::defaults()) {
  ParsedEvents out;
  for (const auto& line : lines) {
    if (io::is_blank(line)) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception&) {
      ++out.rejected;
      continue;
    }
    auto v = event_from_json(j, vocabulary);
    if (v.event) {
      out.events.push_back(std::move(*v.event));
    } else {
      ++out.rejected;
    }
  }
  sort_events(out.events);
  return out;
}

// --- sessions --------------------------------------------------------------

struct Session {
  std::string client_id;
  std::vector<UsageEvent> events;

  Timestamp start() const { return events.front().timestamp; }
  Timestamp end() const { return events.back().timestamp; }
  std::chrono::milliseconds duration() const { return end() - start(); }
};

inline constexpr std::chrono::minutes kDefaultSessionTimeout{30};

// A new session starts at the first event whose gap to its predecessor is
// at least `timeout`, or whose client differs.
inline std::vector<Session> sessionize(const std::vector<UsageEvent>& events,
                                       std::chrono::milliseconds timeout = kDefaultSessionTimeout) {
  std::vector<Session> sessions;
  for (const auto& e : events) {
    const bool fresh = sessions.empty() || sessions.back().client_id != e.client_id ||
                       e.timestamp - sessions.back().end() >= timeout;
    if (fresh) sessions.push_back({e.client_id, {}});
    sessions.back().events.push_back(e);
  }
  return sessions;
}

// --- paths -----------------------------------------------------------------

inline constexpr std::array<std::string_view, 4> kPathClasses = {"search", "view_record",
                                                                 "positive", "other"};

inline bool is_record_view(std::string_view action) {
  return action == "view_record" || action == "view_record_links";
}

inline std::string_view path_class(std::string_view action) {
  if (action == "search") return "search";
  if (is_record_view(action)) return "view_record";
  for (const auto& s : kSignalActions) {
    if (s.action == action) return "positive";
  }
  return "other";
}

struct PathAggregate {
  std::size_t depth = 0;
  std::size_t sessions = 0;
  // step_counts[i][class] for step i+1.
  std::vector<std::map<std::string, std::size_t>> step_counts;
  // (step, from_class, to_class) -> count, step is 1-based for the source.
  std::map<std::tuple<std::size_t, std::string, std::string>, std::size_t> transitions;

  friend bool operator==(const PathAggregate&, const PathAggregate&) = default;
};

inline PathAggregate aggregate_paths(const std::vector<Session>& sessions, std::size_t k = 8) {
  if (k < 1) throw Error(ErrorCode::invalid_argument, "path depth must be >= 1");
  PathAggregate agg;
  agg.depth = k;
  agg.sessions = sessions.size();
  for (const auto& s : sessions) {
    const std::size_t steps = std::min(k, s.events.size());
    if (agg.step_counts.size() < steps) agg.step_counts.resize(steps);
    for (std::size_t i = 0; i < steps; ++i) {
      const std::string cls(path_class(s.events[i].action));
      ++agg.step_counts[i][cls];
      if (i + 1 < steps) {
        ++agg.transitions[{i + 1, cls, std::string(path_class(s.events[i + 1].action))}];
      }
    }
  }
  return agg;
}

// --- report ----------------------------------------------------------------

using CountMap = std::map<std::string, std::size_t>;
using ShareMap = std::map<std::string, double>;

inline ShareMap shares_of(const CountMap& counts) {
  std::size_t total = 0;
  for (const auto& [k, n] : counts) total += n;
  ShareMap out;
  if (total == 0) return out;
  for (const auto& [k, n] : counts) {
    out[k] = static_cast<double>(n) / static_cast<double>(total);
  }
  return out;
}

struct UsageReport {
  std::size_t session_count = 0;
  std::size_t event_count = 0;
  double mean_duration_seconds = 0.0;
  double mean_actions_per_session = 0.0;

  CountMap search_category_counts;  // search actions by category
  ShareMap search_category_shares;

  std::size_t category_change_count = 0;
  std::size_t sessions_with_category_change = 0;
  double category_change_session_share = 0.0;
  CountMap category_change_target_counts;
  ShareMap category_change_target_shares;

  CountMap first_action_counts;  // search / view_record / other
  ShareMap first_action_shares;
  CountMap first_search_category_counts;
  ShareMap first_search_category_shares;
  CountMap first_view_category_counts;
  ShareMap first_view_category_shares;

  std::size_t positive_session_count = 0;
  double positive_session_rate = 0.0;
  std::size_t positive_signal_count = 0;
  double mean_signals_per_positive_session = 0.0;
  double sd_signals_per_positive_session = 0.0;
  double mean_signals_per_session = 0.0;
  CountMap signal_action_counts;
  ShareMap signal_action_shares;
  CountMap signal_group_counts;
  ShareMap signal_group_shares;

  PathAggregate positive_session_paths;
  PathAggregate link_section_paths;

  std::size_t sessions_with_linked_views = 0;
  std::size_t record_views_with_links = 0;
  std::size_t link_section_sessions = 0;
  double link_section_open_rate = 0.0;

  CountMap link_direction_counts;  // "from->to"
  ShareMap link_direction_shares;
  std::size_t link_clicks_unattributed = 0;

  friend bool operator==(const UsageReport&, const UsageReport&) = default;
};

inline constexpr std::string_view kUnknownCategory = "unknown";

inline UsageReport compute_report(const std::vector<Session>& sessions, std::size_t path_depth = 8) {
  UsageReport r;
  r.session_count = sessions.size();
  std::vector<Session> positive_sessions;
  std::vector<Session> link_sessions;
  std::vector<std::size_t> positive_signal_counts;
  std::int64_t total_duration_ms = 0;

  for (const auto& s : sessions) {
    r.event_count += s.events.size();
    total_duration_ms += s.duration().count();

    const auto& first = s.events.front();
    const std::string cat_of_first = first.category.value_or(std::string(kUnknownCategory));
    if (first.action == "search") {
      ++r.first_action_counts["search"];
      ++r.first_search_category_counts[first.category.value_or(std::string(kAllCategoriesName))];
    } else if (is_record_view(first.action)) {
      ++r.first_action_counts["view_record"];
      ++r.first_view_category_counts[cat_of_first];
    } else {
      ++r.first_action_counts["other"];
    }

    std::optional<std::string> last_search_category;
    bool changed = false;
    bool has_linked_view = false;
    bool opened_links = false;
    std::size_t signals = 0;
    for (const auto& e : s.events) {
      if (e.action == "search") {
        ++r.search_category_counts[e.category.value_or(std::string(kAllCategoriesName))];
      }
      if (e.action == "search" || e.action == "change_category") {
        const std::string cat = e.category.value_or(std::string(kAllCategoriesName));
        if (last_search_category && *last_search_category != cat) {
          ++r.category_change_count;
          ++r.category_change_target_counts[cat];
          changed = true;
        }
        last_search_category = cat;
      }
      if (e.action == "view_record_links" || (is_record_view(e.action) && e.has_links.value_or(false))) {
        has_linked_view = true;
        ++r.record_views_with_links;
      }
      if (auto group = signal_group_of(e.action)) {
        ++signals;
        ++r.signal_action_counts[e.action];
        ++r.signal_group_counts[std::string(to_string(*group))];
        if (*group == SignalGroup::view_linked_resources) opened_links = true;
      }
      if (e.action == "click_on_linked_resource") {
        if (e.category && e.target_category) {
          ++r.link_direction_counts[*e.category + "->" + *e.target_category];
        } else {
          ++r.link_clicks_unattributed;
        }
      }
    }
    if (changed) ++r.sessions_with_category_change;
    if (signals > 0) {
      ++r.positive_session_count;
      positive_signal_counts.push_back(signals);
      positive_sessions.push_back(s);
    }
    r.positive_signal_count += signals;
    if (has_linked_view) {
      ++r.sessions_with_linked_views;
      if (opened_links) ++r.link_section_sessions;
    }
    if (opened_links) link_sessions.push_back(s);
  }

  if (r.session_count > 0) {
    const double n = static_cast<double>(r.session_count);
    r.mean_duration_seconds = static_cast<double>(total_duration_ms) / 1000.0 / n;
    r.mean_actions_per_session = static_cast<double>(r.event_count) / n;
    r.category_change_session_share = static_cast<double>(r.sessions_with_category_change) / n;
    r.positive_session_rate = static_cast<double>(r.positive_session_count) / n;
    r.mean_signals_per_session = static_cast<double>(r.positive_signal_count) / n;
  }
  if (!positive_signal_counts.empty()) {
    const double n = static_cast<double>(positive_signal_counts.size());
    double sum = 0;
    for (auto c : positive_signal_counts) sum += static_cast<double>(c);
    const double mean = sum / n;
    double ss = 0;
    for (auto c : positive_signal_counts) ss += (static_cast<double>(c) - mean) * (static_cast<double>(c) - mean);
    r.mean_signals_per_positive_session = mean;
    r.sd_signals_per_positive_session = n > 1 ? std::sqrt(ss / (n - 1)) : 0.0;
  }
  if (r.sessions_with_linked_views > 0) {
    r.link_section_open_rate = static_cast<double>(r.link_section_sessions) /
                               static_cast<double>(r.sessions_with_linked_views);
  }

  r.search_category_shares = shares_of(r.search_category_counts);
  r.category_change_target_shares = shares_of(r.category_change_target_counts);
  r.first_action_shares = shares_of(r.first_action_counts);
  r.first_search_category_shares = shares_of(r.first_search_category_counts);
  r.first_view_category_shares = shares_of(r.first_view_category_counts);
  r.signal_action_shares = shares_of(r.signal_action_counts);
  r.signal_group_shares = shares_of(r.signal_group_counts);
  r.link_direction_shares = shares_of(r.link_direction_counts);
  r.positive_session_paths = aggregate_paths(positive_sessions, path_depth);
  r.link_section_paths = aggregate_paths(link_sessions, path_depth);
  return r;
}

// --- serialization ---------------------------------------------------------

inline json path_rows_to_json(const PathAggregate& agg) {
  json steps = json::array();
  for (std::size_t i = 0; i < agg.step_counts.size(); ++i) {
    steps.push_back({{"step", i + 1}, {"counts", agg.step_counts[i]}});
  }
  json rows = json::array();
  for (const auto& [key, count] : agg.transitions) {
    rows.push_back({{"step", std::get<0>(key)},
                    {"from_class", std::get<1>(key)},
                    {"to_class", std::get<2>(key)},
                    {"count", count}});
  }
  return {{"depth", agg.depth}, {"sessions", agg.sessions}, {"steps", std::move(steps)},
          {"transitions", std::move(rows)}};
}

inline json report_to_json(const UsageReport& r) {
  return {
      {"sessions", {{"count", r.session_count},
                    {"events", r.event_count},
                    {"mean_duration_seconds", r.mean_duration_seconds},
                    {"mean_actions_per_session", r.mean_actions_per_session}}},
      {"search_categories", {{"counts", r.search_category_counts},
                             {"shares", r.search_category_shares}}},
      {"category_changes", {{"count", r.category_change_count},
                            {"sessions_with_change", r.sessions_with_category_change},
                            {"session_share", r.category_change_session_share},
                            {"target_counts", r.category_change_target_counts},
                            {"target_shares", r.category_change_target_shares}}},
      {"first_action", {{"counts", r.first_action_counts},
                        {"shares", r.first_action_shares},
                        {"search_category_counts", r.first_search_category_counts},
                        {"search_category_shares", r.first_search_category_shares},
                        {"view_record_category_counts", r.first_view_category_counts},
                        {"view_record_category_shares", r.first_view_category_shares}}},
      {"positive", {{"sessions", r.positive_session_count},
                    {"session_rate", r.positive_session_rate},
                    {"signal_count", r.positive_signal_count},
                    {"mean_per_positive_session", r.mean_signals_per_positive_session},
                    {"sd_per_positive_session", r.sd_signals_per_positive_session},
                    {"mean_per_session", r.mean_signals_per_session}}},
      {"signals", {{"action_counts", r.signal_action_counts},
                   {"action_shares", r.signal_action_shares},
                   {"group_counts", r.signal_group_counts},
                   {"group_shares", r.signal_group_shares}}},
      {"paths", {{"positive_sessions", path_rows_to_json(r.positive_session_paths)},
                 {"link_section_sessions", path_rows_to_json(r.link_section_paths)}}},
      {"link_section", {{"sessions_with_linked_views", r.sessions_with_linked_views},
                        {"record_views_with_links", r.record_views_with_links},
                        {"sessions_opened", r.link_section_sessions},
                        {"open_rate", r.link_section_open_rate}}},
      {"link_directions", {{"counts", r.link_direction_counts},
                           {"shares", r.link_direction_shares},
                           {"unattributed", r.link_clicks_unattributed}}},
  };
}

inline std::string path_rows_csv(const PathAggregate& agg) {
  std::string out = "step,from_class,to_class,count\n";
  for (const auto& [key, count] : agg.transitions) {
    out += std::to_string(std::get<0>(key)) + "," + std::get<1>(key) + "," + std::get<2>(key) +
           "," + std::to_string(count) + "\n";
  }
  return out;
}

inline std::string direction_matrix_csv(const UsageReport& r) {
  std::string out = "from_category,to_category,count,share\n";
  for (const auto& [key, count] : r.link_direction_counts) {
    const auto arrow = key.find("->");
    json share = r.link_direction_shares.at(key);
    out += key.substr(0, arrow) + "," + key.substr(arrow + 2) + "," + std::to_string(count) + "," +
           share.dump() + "\n";
  }
  return out;
}

}  // namespace datanexus::analytics
