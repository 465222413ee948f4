#pragma once
// Dictionary-based detection of dataset mentions in publication full texts
// and their resolution against a dataset registry.
//
// Matching is token based: an alias matches a run of consecutive text tokens
// (case-folded, split on non-alphanumerics), which gives whole-word semantics.
// Offsets are UTF-8 byte offsets into the original text.

#include <algorithm>
#include <future>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_map>
#include <vector>

#include "datanexus/io.hpp"
#include "datanexus/model.hpp"
#include "datanexus/text.hpp"

namespace datanexus::mentions {

struct DatasetEntry {
  std::string id;
  std::string title;
  std::vector<std::string> aliases;
  std::vector<int> years;
};

class Registry {
 public:
  Registry() = default;
  explicit Registry(std::vector<DatasetEntry> entries) : entries_(std::move(entries)) {
    for (std::size_t i = 0; i < entries_.size(); ++i) by_id_.emplace(entries_[i].id, i);
  }

  const DatasetEntry* find(std::string_view id) const {
    auto it = by_id_.find(std::string(id));
    return it == by_id_.end() ? nullptr : &entries_[it->second];
  }

  const std::vector<DatasetEntry>& entries() const { return entries_; }

 private:
  std::vector<DatasetEntry> entries_;
  std::unordered_map<std::string, std::size_t> by_id_;
};

// One dataset per line: {"id", "title", "aliases": [...], "years": [...]}.
inline Registry parse_registry(const std::vector<std::string>& lines) {
  std::vector<DatasetEntry> entries;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (io::is_blank(lines[i])) continue;
    try {
      const json j = json::parse(lines[i]);
      DatasetEntry e;
      e.id = j.at("id").get<std::string>();
      e.title = j.at("title").get<std::string>();
      if (j.contains("aliases")) e.aliases = j["aliases"].get<std::vector<std::string>>();
      if (j.contains("years")) e.years = j["years"].get<std::vector<int>>();
      if (e.id.empty()) throw Error(ErrorCode::invalid_argument, "empty dataset id");
      entries.push_back(std::move(e));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::invalid_argument,
                  "registry line " + std::to_string(i + 1) + ": " + e.what());
    }
  }
  return Registry(std::move(entries));
}

inline std::string alias_key(std::string_view alias) {
  std::string key;
  for (const auto& tok : text::tokenize_with_offsets(alias)) {
    if (!key.empty()) key += ' ';
    key += tok.text;
  }
  return key;
}

class AliasTable {
 public:
  AliasTable() = default;

  // Titles, declared aliases, and "<title> <year>" forms. Aliases get no
  // year variants so a trailing year stays a separate year token.
  explicit AliasTable(const Registry& registry) {
    for (const auto& e : registry.entries()) {
      add(e.title, e.id);
      for (const auto& a : e.aliases) add(a, e.id);
      for (int y : e.years) add(e.title + " " + std::to_string(y), e.id);
    }
  }

  void add(std::string_view alias, const std::string& dataset_id) {
    std::string key = alias_key(alias);
    if (key.empty()) return;
    auto [slot, is_new_key] = table_.try_emplace(key);
    auto& ids = slot->second;
    if (std::find(ids.begin(), ids.end(), dataset_id) == ids.end()) {
      ids.insert(std::upper_bound(ids.begin(), ids.end(), dataset_id), dataset_id);
    }
    if (is_new_key) {
      std::vector<std::string> toks;
      std::size_t start = 0;
      while (start <= key.size()) {
        auto sp = key.find(' ', start);
        if (sp == std::string::npos) sp = key.size();
        toks.push_back(key.substr(start, sp - start));
        start = sp + 1;
      }
      by_first_token_[toks.front()].push_back({std::move(toks), key});
    }
  }

  const std::vector<std::string>* lookup(std::string_view key) const {
    auto it = table_.find(std::string(key));
    return it == table_.end() ? nullptr : &it->second;
  }

  bool empty() const { return table_.empty(); }
  std::size_t size() const { return table_.size(); }

  struct Sequence {
    std::vector<std::string> tokens;
    std::string key;
  };

  const std::vector<Sequence>* starting_with(const std::string& token) const {
    auto it = by_first_token_.find(token);
    return it == by_first_token_.end() ? nullptr : &it->second;
  }

 private:
  std::unordered_map<std::string, std::vector<std::string>> table_;
  std::unordered_map<std::string, std::vector<Sequence>> by_first_token_;
};

struct Mention {
  std::string document_id;
  std::string surface;
  std::size_t start = 0;  // byte offset, inclusive
  std::size_t end = 0;    // byte offset, exclusive
  std::optional<std::string> year_token;
  std::string context_passage;
  std::string alias;  // normalized alias key that matched

  friend bool operator==(const Mention&, const Mention&) = default;
};

inline constexpr std::size_t kPassageRadius = 120;  // code points each side

namespace detail {

inline bool is_year_token(std::string_view t) {
  if (t.size() != 4) return false;
  if (!std::all_of(t.begin(), t.end(), [](char c) { return c >= '0' && c <= '9'; })) {
    return false;
  }
  return t.starts_with("18") || t.starts_with("19") || t.starts_with("20");
}

// Up to kPassageRadius code points either side, cut back to the nearest
// period (kept on the right) when one falls inside the window.
inline std::string passage_around(std::string_view text, std::size_t start, std::size_t end) {
  const std::size_t left_limit = text::retreat_code_points(text, start, kPassageRadius);
  std::size_t p_start = left_limit;
  const auto dot_left = text.substr(left_limit, start - left_limit).rfind('.');
  if (dot_left != std::string_view::npos) p_start = left_limit + dot_left + 1;

  const std::size_t right_limit = text::advance_code_points(text, end, kPassageRadius);
  std::size_t p_end = right_limit;
  const auto dot_right = text.substr(end, right_limit - end).find('.');
  if (dot_right != std::string_view::npos) p_end = end + dot_right + 1;

  return std::string(text::trim(text.substr(p_start, p_end - p_start)));
}

}  // namespace detail

inline std::vector<Mention> extract_mentions(std::string_view text, const AliasTable& aliases,
                                             std::string_view document_id = {}) {
  const auto tokens = text::tokenize_with_offsets(text);
  struct Match {
    std::size_t first;
    std::size_t count;
    const std::string* key;
  };
  std::vector<Match> matches;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const auto* seqs = aliases.starting_with(tokens[i].text);
    if (!seqs) continue;
    for (const auto& seq : *seqs) {
      const std::size_t n = seq.tokens.size();
      if (i + n > tokens.size()) continue;
      bool ok = true;
      for (std::size_t k = 1; k < n && ok; ++k) ok = tokens[i + k].text == seq.tokens[k];
      if (ok) matches.push_back({i, n, &seq.key});
    }
  }
  // Longest alias wins on overlap; earlier start breaks ties.
  std::sort(matches.begin(), matches.end(), [](const Match& a, const Match& b) {
    if (a.count != b.count) return a.count > b.count;
    if (a.first != b.first) return a.first < b.first;
    return *a.key < *b.key;
  });
  std::vector<bool> taken(tokens.size(), false);
  std::vector<Match> kept;
  for (const auto& m : matches) {
    bool free = true;
    for (std::size_t k = m.first; k < m.first + m.count && free; ++k) free = !taken[k];
    if (!free) continue;
    for (std::size_t k = m.first; k < m.first + m.count; ++k) taken[k] = true;
    kept.push_back(m);
  }
  std::sort(kept.begin(), kept.end(), [](const Match& a, const Match& b) { return a.first < b.first; });

  std::vector<Mention> out;
  out.reserve(kept.size());
  for (const auto& m : kept) {
    Mention mention;
    mention.document_id = std::string(document_id);
    mention.start = tokens[m.first].begin;
    mention.end = tokens[m.first + m.count - 1].end;
    mention.surface = std::string(text.substr(mention.start, mention.end - mention.start));
    mention.alias = *m.key;
    for (std::size_t j = m.first + m.count; j < std::min(tokens.size(), m.first + m.count + 2); ++j) {
      if (detail::is_year_token(tokens[j].text)) {
        mention.year_token = tokens[j].text;
        break;
      }
    }
    mention.context_passage = detail::passage_around(text, mention.start, mention.end);
    out.push_back(std::move(mention));
  }
  return out;
}

struct Candidate {
  std::string dataset_id;
  double similarity = 0.0;
  double confidence = 0.0;

  friend bool operator==(const Candidate&, const Candidate&) = default;
};

// Similarity is 1.0 for an alias hit whose year (if any) agrees with the
// dataset; otherwise normalized edit similarity of surface+year vs. title.
// Confidence divides by the number of candidates k.
inline std::vector<Candidate> resolve_mention(const Mention& mention, const Registry& registry,
                                              const AliasTable& aliases) {
  std::vector<Candidate> out;
  const auto* ids = aliases.lookup(mention.alias.empty() ? alias_key(mention.surface)
                                                         : mention.alias);
  if (!ids) return out;
  for (const auto& id : *ids) {
    const DatasetEntry* e = registry.find(id);
    if (!e) continue;
    bool exact = true;
    if (mention.year_token && !e->years.empty()) {
      const int y = std::stoi(*mention.year_token);
      exact = std::find(e->years.begin(), e->years.end(), y) != e->years.end();
    }
    double sim = 1.0;
    if (!exact) {
      std::string probe = mention.surface;
      if (mention.year_token) probe += " " + *mention.year_token;
      sim = text::edit_similarity(text::normalize_text(probe), text::normalize_text(e->title));
    }
    if (sim <= 0.0) continue;
    out.push_back({id, sim, 0.0});
  }
  const double k = static_cast<double>(out.size());
  for (auto& c : out) c.confidence = c.similarity / k;
  std::sort(out.begin(), out.end(), [](const Candidate& a, const Candidate& b) {
    if (a.confidence != b.confidence) return a.confidence > b.confidence;
    return a.dataset_id < b.dataset_id;
  });
  return out;
}

// An automatic publication -> dataset link proposed by extraction.
struct ExtractedLink {
  std::string document_id;
  std::string dataset_id;
  double confidence = 0.0;
  std::string passage;
};

struct Document {
  std::string id;
  std::string text;
};

inline std::vector<ExtractedLink> extract_document_links(const Document& doc,
                                                         const Registry& registry,
                                                         const AliasTable& aliases) {
  std::vector<ExtractedLink> out;
  for (const auto& m : extract_mentions(doc.text, aliases, doc.id)) {
    for (const auto& c : resolve_mention(m, registry, aliases)) {
      out.push_back({doc.id, c.dataset_id, c.confidence, m.context_passage});
    }
  }
  return out;
}

// Documents are processed in parallel; output follows input order.
inline std::vector<ExtractedLink> extract_links(const std::vector<Document>& docs,
                                                const Registry& registry,
                                                const AliasTable& aliases) {
  const std::size_t workers =
      std::max<std::size_t>(1, std::min<std::size_t>(docs.size(), std::thread::hardware_concurrency()));
  std::vector<std::vector<ExtractedLink>> per_doc(docs.size());
  std::vector<std::future<void>> jobs;
  for (std::size_t w = 0; w < workers; ++w) {
    jobs.push_back(std::async(std::launch::async, [&, w] {
      for (std::size_t i = w; i < docs.size(); i += workers) {
        per_doc[i] = extract_document_links(docs[i], registry, aliases);
      }
    }));
  }
  for (auto& j : jobs) j.get();
  std::vector<ExtractedLink> out;
  for (auto& v : per_doc) out.insert(out.end(), v.begin(), v.end());
  return out;
}

// Row in the links import format, so extracted links go through the same
// endpoint resolution as curated ones.
inline json to_import_row(const ExtractedLink& l) {
  return {{"from", l.document_id}, {"to", l.dataset_id}, {"method", "automatic"},
          {"confidence", l.confidence}, {"passage", l.passage}, {"note", l.passage}};
}

}  // namespace datanexus::mentions
