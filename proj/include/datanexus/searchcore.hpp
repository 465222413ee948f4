#pragma once
// Inverted index, conjunctive ranked retrieval with per-field BM25 and
// boosts, per-category totals, multi-select facets, and highlighted snippets.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "datanexus/io.hpp"
#include "datanexus/model.hpp"
#include "datanexus/text.hpp"

namespace datanexus::search {

namespace fs = std::filesystem;

enum class Field : std::uint8_t { title, description, creators, type_specific, full_text };

inline constexpr std::size_t kFieldCount = 5;
inline constexpr std::array<Field, kFieldCount> kFields = {
    Field::title, Field::description, Field::creators, Field::type_specific, Field::full_text};
inline constexpr std::array<double, kFieldCount> kFieldBoost = {3.0, 1.5, 2.0, 1.0, 1.0};
inline constexpr double kBm25K1 = 1.2;
inline constexpr double kBm25B = 0.75;

inline constexpr std::size_t kMaxLimit = 100;
inline constexpr std::size_t kSnippetWidth = 200;  // code points

inline std::string_view to_string(Field f) {
  switch (f) {
    case Field::title: return "title";
    case Field::description: return "description";
    case Field::creators: return "creators";
    case Field::type_specific: return "type_specific";
    case Field::full_text: return "full_text";
  }
  return "";
}

inline std::vector<std::string> tokenize(std::string_view s) {
  std::vector<std::string> out;
  for (auto& t : text::tokenize_with_offsets(s)) out.push_back(std::move(t.text));
  return out;
}

// Text of one indexed field. Multi-valued fields are joined with newlines.
inline std::string field_text(const Record& r, Field f) {
  switch (f) {
    case Field::title: return r.title;
    case Field::description: return r.description;
    case Field::creators: {
      std::string s;
      for (const auto& c : r.creators) (s += c) += '\n';
      return s;
    }
    case Field::type_specific: {
      std::string s;
      for (const auto& [k, v] : r.type_specific) (s += v) += '\n';
      return s;
    }
    case Field::full_text: return r.full_text.value_or(std::string{});
  }
  return {};
}

struct Posting {
  std::uint32_t doc = 0;
  std::uint32_t tf = 0;

  friend bool operator==(const Posting&, const Posting&) = default;
};

struct DocInfo {
  std::string id;
  Category category = Category::publication;
  std::optional<int> year;
  std::string source;
  std::optional<std::string> language;

  friend bool operator==(const DocInfo&, const DocInfo&) = default;
};

inline constexpr std::array<std::string_view, 3> kFacetFields = {"year", "source", "language"};

inline std::optional<std::string> facet_value(const DocInfo& d, std::string_view field) {
  if (field == "year") return d.year ? std::optional(std::to_string(*d.year)) : std::nullopt;
  if (field == "source") return d.source;
  if (field == "language") return d.language;
  return std::nullopt;
}

class IndexSnapshot {
 public:
  using PostingMap = std::unordered_map<std::string, std::vector<Posting>>;

  std::size_t doc_count() const { return docs_.size(); }
  const DocInfo& doc(std::uint32_t ord) const { return docs_.at(ord); }
  const std::vector<DocInfo>& docs() const { return docs_; }

  std::optional<std::uint32_t> ordinal_of(std::string_view id) const {
    auto it = ordinal_.find(std::string(id));
    if (it == ordinal_.end()) return std::nullopt;
    return it->second;
  }

  const std::vector<Posting>* postings(Field f, std::string_view term) const {
    const auto& map = postings_[static_cast<std::size_t>(f)];
    auto it = map.find(std::string(term));
    return it == map.end() ? nullptr : &it->second;
  }

  std::size_t document_frequency(Field f, std::string_view term) const {
    const auto* p = postings(f, term);
    return p ? p->size() : 0;
  }

  const PostingMap& field_postings(Field f) const {
    return postings_[static_cast<std::size_t>(f)];
  }

  std::uint32_t doc_length(Field f, std::uint32_t ord) const {
    return lengths_[static_cast<std::size_t>(f)].at(ord);
  }

  double average_length(Field f) const { return average_[static_cast<std::size_t>(f)]; }

  // Records must be given in ascending id order; ordinals follow it.
  static IndexSnapshot build(const std::vector<const Record*>& records) {
    IndexSnapshot idx;
    idx.docs_.reserve(records.size());
    for (auto& l : idx.lengths_) l.assign(records.size(), 0);
    for (std::uint32_t ord = 0; ord < records.size(); ++ord) {
      const Record& r = *records[ord];
      idx.docs_.push_back({r.id, r.category, r.year, r.source, r.language});
      idx.ordinal_.emplace(r.id, ord);
      for (Field f : kFields) {
        const auto fi = static_cast<std::size_t>(f);
        const auto tokens = tokenize(field_text(r, f));
        idx.lengths_[fi][ord] = static_cast<std::uint32_t>(tokens.size());
        std::unordered_map<std::string_view, std::uint32_t> tf;
        for (const auto& t : tokens) ++tf[t];
        for (const auto& [term, count] : tf) {
          idx.postings_[fi][std::string(term)].push_back({ord, count});
        }
      }
    }
    idx.finish();
    return idx;
  }

  std::string serialize() const;
  static IndexSnapshot deserialize(std::string_view bytes);

  friend bool operator==(const IndexSnapshot& a, const IndexSnapshot& b) {
    return a.docs_ == b.docs_ && a.lengths_ == b.lengths_ && a.postings_ == b.postings_;
  }

 private:
  void finish() {
    if (ordinal_.size() != docs_.size()) {
      throw Error(ErrorCode::invalid_argument, "duplicate record id in index input");
    }
    for (std::size_t f = 0; f < kFieldCount; ++f) {
      double total = 0;
      for (auto len : lengths_[f]) total += len;
      average_[f] = docs_.empty() ? 0.0 : total / static_cast<double>(docs_.size());
    }
  }

  std::vector<DocInfo> docs_;
  std::unordered_map<std::string, std::uint32_t> ordinal_;
  std::array<PostingMap, kFieldCount> postings_;
  std::array<std::vector<std::uint32_t>, kFieldCount> lengths_;
  std::array<double, kFieldCount> average_{};
};

template <typename RecordMap>
IndexSnapshot build_index(const RecordMap& records) {
  std::vector<const Record*> ordered;
  ordered.reserve(records.size());
  for (const auto& [id, rec] : records) {
    if constexpr (std::is_pointer_v<std::decay_t<decltype(rec)>>) {
      ordered.push_back(rec);
    } else {
      ordered.push_back(&rec);
    }
  }
  std::sort(ordered.begin(), ordered.end(),
            [](const Record* a, const Record* b) { return a->id < b->id; });
  return IndexSnapshot::build(ordered);
}

// --- binary artifact -------------------------------------------------------

namespace detail {

inline constexpr std::string_view kIndexMagic = "DNXIDX01";

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    out_.append(s);
  }
  void raw(std::string_view s) { out_.append(s); }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view in) : in_(in) {}
  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(in_[pos_++]);
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in_[pos_ + i])) << (8 * i);
    }
    pos_ += 4;
    return v;
  }
  std::string str() {
    const auto n = u32();
    need(n);
    std::string s(in_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  std::string_view raw(std::size_t n) {
    need(n);
    auto s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > in_.size()) throw Error(ErrorCode::artifact_corrupt, "truncated index file");
  }
  std::string_view in_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::string IndexSnapshot::serialize() const {
  detail::Writer w;
  w.raw(detail::kIndexMagic);
  w.u32(static_cast<std::uint32_t>(docs_.size()));
  for (const auto& d : docs_) {
    w.str(d.id);
    w.u8(static_cast<std::uint8_t>(d.category));
    w.u8(d.year ? 1 : 0);
    w.u32(d.year ? static_cast<std::uint32_t>(*d.year) : 0);
    w.str(d.source);
    w.u8(d.language ? 1 : 0);
    w.str(d.language.value_or(std::string{}));
  }
  for (std::size_t f = 0; f < kFieldCount; ++f) {
    for (auto len : lengths_[f]) w.u32(len);
    std::vector<const std::string*> terms;
    terms.reserve(postings_[f].size());
    for (const auto& [term, list] : postings_[f]) terms.push_back(&term);
    std::sort(terms.begin(), terms.end(), [](auto* a, auto* b) { return *a < *b; });
    w.u32(static_cast<std::uint32_t>(terms.size()));
    for (const auto* term : terms) {
      const auto& list = postings_[f].at(*term);
      w.str(*term);
      w.u32(static_cast<std::uint32_t>(list.size()));
      for (const auto& p : list) {
        w.u32(p.doc);
        w.u32(p.tf);
      }
    }
  }
  return w.take();
}

inline IndexSnapshot IndexSnapshot::deserialize(std::string_view bytes) {
  detail::Reader r(bytes);
  if (r.raw(detail::kIndexMagic.size()) != detail::kIndexMagic) {
    throw Error(ErrorCode::artifact_corrupt, "not an index file");
  }
  IndexSnapshot idx;
  const auto n = r.u32();
  idx.docs_.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    DocInfo d;
    d.id = r.str();
    const auto cat = r.u8();
    if (cat >= kAllCategories.size()) throw Error(ErrorCode::artifact_corrupt, "bad category");
    d.category = static_cast<Category>(cat);
    const bool has_year = r.u8() != 0;
    const auto year = r.u32();
    if (has_year) d.year = static_cast<int>(year);
    d.source = r.str();
    const bool has_lang = r.u8() != 0;
    auto lang = r.str();
    if (has_lang) d.language = std::move(lang);
    idx.ordinal_.emplace(d.id, i);
    idx.docs_.push_back(std::move(d));
  }
  for (std::size_t f = 0; f < kFieldCount; ++f) {
    idx.lengths_[f].resize(n);
    for (std::uint32_t i = 0; i < n; ++i) idx.lengths_[f][i] = r.u32();
    const auto terms = r.u32();
    idx.postings_[f].reserve(terms);
    for (std::uint32_t t = 0; t < terms; ++t) {
      auto term = r.str();
      const auto count = r.u32();
      std::vector<Posting> list(count);
      for (auto& p : list) {
        p.doc = r.u32();
        p.tf = r.u32();
        if (p.doc >= n) throw Error(ErrorCode::artifact_corrupt, "posting beyond doc count");
      }
      for (std::size_t k = 1; k < list.size(); ++k) {
        if (list[k].doc <= list[k - 1].doc) {
          throw Error(ErrorCode::artifact_corrupt, "postings not strictly ascending");
        }
      }
      idx.postings_[f].emplace(std::move(term), std::move(list));
    }
  }
  if (!r.done()) throw Error(ErrorCode::artifact_corrupt, "trailing bytes in index file");
  idx.finish();
  return idx;
}

inline constexpr std::string_view kIndexFile = "index.bin";

inline void write_index(const IndexSnapshot& idx, const fs::path& dir) {
  io::write_file(dir / kIndexFile, idx.serialize());
}

inline IndexSnapshot read_index(const fs::path& dir) {
  const auto path = dir / kIndexFile;
  if (!fs::exists(path)) throw Error(ErrorCode::artifact_missing, "missing index file: " + path.string());
  return IndexSnapshot::deserialize(io::read_file(path));
}

// --- queries ---------------------------------------------------------------

struct SearchQuery {
  std::vector<std::string> terms;
  CategoryFilter category;  // nullopt = all
  std::map<std::string, std::set<std::string>> facet_filters;
  std::size_t offset = 0;
  std::size_t limit = 10;
};

inline void validate_query(const SearchQuery& q) {
  if (q.limit < 1 || q.limit > kMaxLimit) {
    throw Error(ErrorCode::invalid_argument, "limit must be in [1, 100]");
  }
  for (const auto& [field, values] : q.facet_filters) {
    if (std::find(kFacetFields.begin(), kFacetFields.end(), field) == kFacetFields.end()) {
      throw Error(ErrorCode::invalid_argument, "unknown facet field '" + field + "'");
    }
  }
}

// Query text -> distinct tokens in first-occurrence order.
inline std::vector<std::string> query_terms(const std::vector<std::string>& raw) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& r : raw) {
    for (auto& t : tokenize(r)) {
      if (seen.insert(t).second) out.push_back(std::move(t));
    }
  }
  return out;
}

struct Hit {
  std::string record_id;
  Category category = Category::publication;
  std::optional<int> year;
  double score = 0.0;
  std::string snippet;  // filled by callers holding the records
};

struct SearchResult {
  std::map<Category, std::size_t> total_by_category;  // all six, zero-filled
  std::size_t total = 0;                               // active category
  std::vector<Hit> hits;
  std::map<std::string, std::map<std::string, std::size_t>> facets;
  std::vector<std::string> terms;
};

inline double bm25_idf(std::size_t doc_count, std::size_t df) {
  const double n = static_cast<double>(doc_count);
  const double d = static_cast<double>(df);
  return std::log(1.0 + (n - d + 0.5) / (d + 0.5));
}

inline double bm25_term(double tf, double doc_len, double avg_len, double idf) {
  const double norm = avg_len > 0.0 ? doc_len / avg_len : 0.0;
  return idf * tf * (kBm25K1 + 1.0) / (tf + kBm25K1 * (1.0 - kBm25B + kBm25B * norm));
}

namespace detail {

inline std::vector<std::uint32_t> union_of(const std::vector<const std::vector<Posting>*>& lists) {
  std::vector<std::uint32_t> out;
  for (const auto* l : lists) {
    std::vector<std::uint32_t> merged;
    merged.reserve(out.size() + l->size());
    auto a = out.begin();
    auto b = l->begin();
    while (a != out.end() || b != l->end()) {
      if (b == l->end() || (a != out.end() && *a < b->doc)) {
        merged.push_back(*a++);
      } else if (a == out.end() || b->doc < *a) {
        merged.push_back((b++)->doc);
      } else {
        merged.push_back(*a++);
        ++b;
      }
    }
    out.swap(merged);
  }
  return out;
}

}  // namespace detail

inline SearchResult execute_query(const IndexSnapshot& index, const SearchQuery& q) {
  validate_query(q);
  SearchResult result;
  for (Category c : kAllCategories) result.total_by_category[c] = 0;
  result.terms = query_terms(q.terms);

  // Conjunctive match: every term in at least one field.
  std::vector<std::uint32_t> matched;
  if (result.terms.empty()) {
    matched.resize(index.doc_count());
    for (std::uint32_t i = 0; i < matched.size(); ++i) matched[i] = i;
  } else {
    bool first = true;
    for (const auto& term : result.terms) {
      std::vector<const std::vector<Posting>*> lists;
      for (Field f : kFields) {
        if (const auto* p = index.postings(f, term)) lists.push_back(p);
      }
      auto docs = detail::union_of(lists);
      if (first) {
        matched = std::move(docs);
        first = false;
      } else {
        std::vector<std::uint32_t> both;
        std::set_intersection(matched.begin(), matched.end(), docs.begin(), docs.end(),
                              std::back_inserter(both));
        matched.swap(both);
      }
      if (matched.empty()) break;
    }
  }

  std::vector<double> scores(matched.size(), 0.0);
  if (!matched.empty()) {
    for (const auto& term : result.terms) {
      for (Field f : kFields) {
        const auto* list = index.postings(f, term);
        if (!list) continue;
        const double idf = bm25_idf(index.doc_count(), list->size());
        const double avg = index.average_length(f);
        const double boost = kFieldBoost[static_cast<std::size_t>(f)];
        auto m = matched.begin();
        for (const auto& p : *list) {
          m = std::lower_bound(m, matched.end(), p.doc);
          if (m == matched.end()) break;
          if (*m != p.doc) continue;
          scores[static_cast<std::size_t>(m - matched.begin())] +=
              boost * bm25_term(p.tf, index.doc_length(f, p.doc), avg, idf);
        }
      }
    }
  }

  auto passes = [&](const DocInfo& d, std::string_view skip) {
    for (const auto& [field, values] : q.facet_filters) {
      if (field == skip || values.empty()) continue;
      const auto v = facet_value(d, field);
      if (!v || !values.contains(*v)) return false;
    }
    return true;
  };

  std::vector<std::size_t> active;
  for (std::size_t i = 0; i < matched.size(); ++i) {
    const DocInfo& d = index.doc(matched[i]);
    const bool in_category = !q.category || d.category == *q.category;
    if (passes(d, {})) {
      ++result.total_by_category[d.category];
      if (in_category) active.push_back(i);
    }
    if (!in_category) continue;
    for (auto field : kFacetFields) {
      if (!passes(d, field)) continue;
      if (auto v = facet_value(d, field)) ++result.facets[std::string(field)][*v];
    }
  }
  result.total = active.size();

  std::sort(active.begin(), active.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    const DocInfo& da = index.doc(matched[a]);
    const DocInfo& db = index.doc(matched[b]);
    const int ya = da.year.value_or(INT32_MIN);
    const int yb = db.year.value_or(INT32_MIN);
    if (ya != yb) return ya > yb;
    return da.id < db.id;
  });
  for (std::size_t k = q.offset; k < active.size() && k < q.offset + q.limit; ++k) {
    const std::size_t i = active[k];
    const DocInfo& d = index.doc(matched[i]);
    result.hits.push_back({d.id, d.category, d.year, scores[i], {}});
  }
  return result;
}

// --- snippets --------------------------------------------------------------

inline constexpr std::string_view kHighlightOpen = "{{";
inline constexpr std::string_view kHighlightClose = "}}";
inline constexpr std::string_view kEllipsis = "…";

namespace detail {

struct Occurrence {
  std::size_t begin;  // code point offsets
  std::size_t end;
  std::size_t term;
};

inline std::string head(std::string_view s) {
  const std::size_t total = text::count_code_points(s);
  if (total <= kSnippetWidth) return std::string(text::trim(s));
  std::size_t cut = text::advance_code_points(s, 0, kSnippetWidth);
  const std::size_t word_cut = s.substr(0, cut).find_last_of(" \t\n");
  if (word_cut != std::string_view::npos && word_cut > 0) cut = word_cut;
  return std::string(text::trim(s.substr(0, cut))) + std::string(kEllipsis);
}

inline std::string window(std::string_view s, const std::vector<text::Token>& tokens,
                          const std::vector<std::string>& terms) {
  // Code point offsets for every byte boundary we touch.
  std::vector<std::size_t> byte_of_cp;
  byte_of_cp.reserve(s.size() + 1);
  std::vector<bool> is_word;
  is_word.reserve(s.size());
  for (std::size_t pos = 0; pos < s.size();) {
    byte_of_cp.push_back(pos);
    is_word.push_back(text::is_word_char(text::decode_utf8(s, pos)));
  }
  byte_of_cp.push_back(s.size());
  const std::size_t total = byte_of_cp.size() - 1;
  auto cp_of_byte = [&](std::size_t b) {
    return static_cast<std::size_t>(std::lower_bound(byte_of_cp.begin(), byte_of_cp.end(), b) -
                                    byte_of_cp.begin());
  };

  std::vector<Occurrence> occ;
  for (const auto& t : tokens) {
    auto it = std::find(terms.begin(), terms.end(), t.text);
    if (it == terms.end()) continue;
    occ.push_back({cp_of_byte(t.begin), cp_of_byte(t.end),
                   static_cast<std::size_t>(it - terms.begin())});
  }

  std::size_t best_i = 0, best_j = 0, best_distinct = 0;
  for (std::size_t i = 0; i < occ.size(); ++i) {
    std::set<std::size_t> distinct;
    std::size_t j = i;
    while (j < occ.size() && occ[j].end - occ[i].begin <= kSnippetWidth) {
      distinct.insert(occ[j].term);
      ++j;
    }
    if (j == i) j = i + 1;  // a single token longer than the window
    if (distinct.size() > best_distinct) {
      best_distinct = distinct.size();
      best_i = i;
      best_j = j;
    }
  }
  const std::size_t span_begin = occ[best_i].begin;
  const std::size_t span_end = occ[best_j - 1].end;
  const std::size_t span = span_end - span_begin;
  const std::size_t slack = span < kSnippetWidth ? kSnippetWidth - span : 0;
  std::size_t ws = span_begin - std::min({span_begin, slack, std::size_t{30}});
  std::size_t we = std::min(total, std::max(ws + kSnippetWidth, span_end));
  while (ws > 0 && ws < span_begin && is_word[ws - 1]) ++ws;
  while (we < total && we > span_end && is_word[we] && is_word[we - 1]) --we;

  std::string out;
  if (ws > 0) out += kEllipsis;
  std::size_t cursor = ws;
  for (const auto& o : occ) {
    if (o.begin < ws || o.end > we) continue;
    out.append(s.substr(byte_of_cp[cursor], byte_of_cp[o.begin] - byte_of_cp[cursor]));
    out += kHighlightOpen;
    out.append(s.substr(byte_of_cp[o.begin], byte_of_cp[o.end] - byte_of_cp[o.begin]));
    out += kHighlightClose;
    cursor = o.end;
  }
  out.append(s.substr(byte_of_cp[cursor], byte_of_cp[we] - byte_of_cp[cursor]));
  if (we < total) out += kEllipsis;
  return out;
}

}  // namespace detail

// Highlights query terms in the description, else the full text. Falls back
// to the head of the description (or the title when it is empty).
inline std::string make_snippet(const Record& record, const std::vector<std::string>& raw_terms) {
  const auto terms = query_terms(raw_terms);
  auto has_term = [&](const std::vector<text::Token>& tokens) {
    return std::any_of(tokens.begin(), tokens.end(), [&](const text::Token& t) {
      return std::find(terms.begin(), terms.end(), t.text) != terms.end();
    });
  };
  for (const std::string* body : {&record.description, record.full_text ? &*record.full_text : nullptr}) {
    if (!body || body->empty() || terms.empty()) continue;
    const auto tokens = text::tokenize_with_offsets(*body);
    if (has_term(tokens)) return detail::window(*body, tokens, terms);
  }
  if (!record.description.empty()) return detail::head(record.description);
  const auto tokens = text::tokenize_with_offsets(record.title);
  if (!terms.empty() && has_term(tokens)) return detail::window(record.title, tokens, terms);
  return detail::head(record.title);
}

}  // namespace datanexus::search
