#pragma once
// Common record schema shared by every stage of the pipeline.

#include <algorithm>
#include <array>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "datanexus/error.hpp"
#include "datanexus/text.hpp"

namespace datanexus {

using json = nlohmann::json;

enum class Category {
  research_data,
  publication,
  question_variable,
  instrument_tool,
  web_page,
  library_record,
};

inline constexpr std::array<Category, 6> kAllCategories = {
    Category::research_data,   Category::publication,
    Category::question_variable, Category::instrument_tool,
    Category::web_page,        Category::library_record,
};

inline std::string_view to_string(Category c) {
  switch (c) {
    case Category::research_data: return "research_data";
    case Category::publication: return "publication";
    case Category::question_variable: return "question_variable";
    case Category::instrument_tool: return "instrument_tool";
    case Category::web_page: return "web_page";
    case Category::library_record: return "library_record";
  }
  return "";
}

inline std::optional<Category> parse_category(std::string_view s) {
  for (Category c : kAllCategories) {
    if (to_string(c) == s) return c;
  }
  return std::nullopt;
}

// Query-side category selector: nullopt means `all`.
using CategoryFilter = std::optional<Category>;

inline constexpr std::string_view kAllCategoriesName = "all";

// Parses a category or `all`; throws invalid_category otherwise.
inline CategoryFilter parse_category_filter(std::string_view s) {
  if (s == kAllCategoriesName) return std::nullopt;
  if (auto c = parse_category(s)) return c;
  throw Error(ErrorCode::invalid_category,
              "unknown category '" + std::string(s) + "'");
}

inline std::string_view to_string(const CategoryFilter& f) {
  return f ? to_string(*f) : kAllCategoriesName;
}

enum class IdScheme { doi, dara, urn, source_local };

// Dedup priority order; also the canonical ordering of external ids.
inline constexpr std::array<IdScheme, 4> kSchemePriority = {
    IdScheme::doi, IdScheme::dara, IdScheme::urn, IdScheme::source_local};

inline std::string_view to_string(IdScheme s) {
  switch (s) {
    case IdScheme::doi: return "doi";
    case IdScheme::dara: return "dara";
    case IdScheme::urn: return "urn";
    case IdScheme::source_local: return "source_local";
  }
  return "";
}

inline std::optional<IdScheme> parse_id_scheme(std::string_view s) {
  for (IdScheme sc : kSchemePriority) {
    if (to_string(sc) == s) return sc;
  }
  return std::nullopt;
}

enum class MaterialKind { dataset, codebook, questionnaire, fulltext, method_report, other };

inline std::string_view to_string(MaterialKind k) {
  switch (k) {
    case MaterialKind::dataset: return "dataset";
    case MaterialKind::codebook: return "codebook";
    case MaterialKind::questionnaire: return "questionnaire";
    case MaterialKind::fulltext: return "fulltext";
    case MaterialKind::method_report: return "method_report";
    case MaterialKind::other: return "other";
  }
  return "";
}

inline std::optional<MaterialKind> parse_material_kind(std::string_view s) {
  for (MaterialKind k : {MaterialKind::dataset, MaterialKind::codebook,
                         MaterialKind::questionnaire, MaterialKind::fulltext,
                         MaterialKind::method_report, MaterialKind::other}) {
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

struct Material {
  MaterialKind kind = MaterialKind::other;
  std::string url;

  friend bool operator==(const Material&, const Material&) = default;
  friend auto operator<=>(const Material&, const Material&) = default;
};

inline constexpr int kMinYear = 1800;
inline constexpr int kMaxYear = 2100;

struct Record {
  std::string id;
  std::map<IdScheme, std::string> external_ids;  // one value per scheme
  Category category = Category::publication;
  std::string title;
  std::string description;
  std::vector<std::string> creators;
  std::optional<int> year;
  std::optional<std::string> language;
  std::string source;
  std::optional<std::string> rights;
  std::vector<Material> materials;  // sorted, unique
  std::map<std::string, std::string> type_specific;
  std::optional<std::string> full_text;
  // Ids of records that were folded into this one during deduplication.
  std::vector<std::string> merged_from;

  friend bool operator==(const Record&, const Record&) = default;
};

struct SourceDescriptor {
  std::string key;
  std::string path;
  std::string format = "records-jsonl";
  Category default_category = Category::publication;
  std::map<std::string, std::string> field_map;
  int priority = 0;
};

// --- identifiers -----------------------------------------------------------

inline std::string normalize_identifier(IdScheme scheme, std::string_view raw) {
  std::string value = text::ascii_lower(text::trim(raw));
  if (scheme == IdScheme::doi) {
    static constexpr std::array<std::string_view, 5> kPrefixes = {
        "https://doi.org/", "http://doi.org/", "https://dx.doi.org/",
        "http://dx.doi.org/", "doi:"};
    bool stripped = true;
    while (stripped) {
      stripped = false;
      for (auto prefix : kPrefixes) {
        if (value.starts_with(prefix)) {
          value = std::string(text::trim(std::string_view(value).substr(prefix.size())));
          stripped = true;
        }
      }
    }
  }
  if (value.empty()) {
    throw Error(ErrorCode::invalid_identifier,
                std::string("empty ") + std::string(to_string(scheme)) + " identifier");
  }
  return value;
}

// --- deduplication ---------------------------------------------------------

using DedupKey = std::string;

// Surname of a person name written "Surname, Given" or "Given Surname".
inline std::string creator_surname(std::string_view creator) {
  const auto comma = creator.find(',');
  if (comma != std::string_view::npos) return text::normalize_text(creator.substr(0, comma));
  const std::string norm = text::normalize_text(creator);
  const auto space = norm.rfind(' ');
  return space == std::string::npos ? norm : norm.substr(space + 1);
}

inline DedupKey composite_key(std::string_view title, std::optional<int> year,
                              std::string_view first_creator) {
  std::string key = "t:";
  key += text::normalize_text(title);
  key += '|';
  if (year) key += std::to_string(*year);
  key += '|';
  key += creator_surname(first_creator);
  return key;
}

inline DedupKey dedup_key(const Record& r) {
  for (IdScheme scheme : kSchemePriority) {
    auto it = r.external_ids.find(scheme);
    if (it != r.external_ids.end()) {
      return std::string(to_string(scheme)) + ":" + it->second;
    }
  }
  return composite_key(r.title, r.year,
                       r.creators.empty() ? std::string_view{} : r.creators.front());
}

// Throws invalid_record when a Record invariant does not hold.
inline void validate_record(const Record& r) {
  auto fail = [&](const std::string& why) {
    throw Error(ErrorCode::invalid_record, "record '" + r.id + "': " + why);
  };
  if (r.id.empty()) fail("empty id");
  if (text::trim(r.title).empty()) fail("empty title");
  if (r.year && (*r.year < kMinYear || *r.year > kMaxYear)) fail("year out of range");
  for (const auto& [scheme, value] : r.external_ids) {
    if (value.empty()) fail("empty external id");
  }
  if (!std::is_sorted(r.materials.begin(), r.materials.end()) ||
      std::adjacent_find(r.materials.begin(), r.materials.end()) != r.materials.end()) {
    fail("materials not canonical");
  }
}

inline void canonicalize_materials(std::vector<Material>& materials) {
  std::sort(materials.begin(), materials.end());
  materials.erase(std::unique(materials.begin(), materials.end()), materials.end());
}

// --- canonical JSON --------------------------------------------------------

inline json record_to_json(const Record& r) {
  json j = json::object();
  j["id"] = r.id;
  j["category"] = to_string(r.category);
  j["title"] = r.title;
  if (!r.description.empty()) j["description"] = r.description;
  if (!r.creators.empty()) j["creators"] = r.creators;
  if (r.year) j["year"] = *r.year;
  if (r.language) j["language"] = *r.language;
  j["source"] = r.source;
  if (r.rights) j["rights"] = *r.rights;
  if (!r.external_ids.empty()) {
    json ids = json::object();
    for (const auto& [scheme, value] : r.external_ids) ids[std::string(to_string(scheme))] = value;
    j["external_ids"] = std::move(ids);
  }
  if (!r.materials.empty()) {
    json mats = json::array();
    for (const auto& m : r.materials) {
      mats.push_back({{"kind", to_string(m.kind)}, {"url", m.url}});
    }
    j["materials"] = std::move(mats);
  }
  if (!r.type_specific.empty()) j["type_specific"] = r.type_specific;
  if (r.full_text) j["full_text"] = *r.full_text;
  if (!r.merged_from.empty()) j["merged_from"] = r.merged_from;
  return j;
}

// Inverse of record_to_json; throws artifact_corrupt on schema mismatch.
inline Record record_from_json(const json& j) {
  try {
    Record r;
    r.id = j.at("id").get<std::string>();
    const auto cat = parse_category(j.at("category").get<std::string>());
    if (!cat) throw Error(ErrorCode::artifact_corrupt, "bad category in record " + r.id);
    r.category = *cat;
    r.title = j.at("title").get<std::string>();
    r.description = j.value("description", std::string{});
    if (j.contains("creators")) r.creators = j["creators"].get<std::vector<std::string>>();
    if (j.contains("year")) r.year = j["year"].get<int>();
    if (j.contains("language")) r.language = j["language"].get<std::string>();
    r.source = j.at("source").get<std::string>();
    if (j.contains("rights")) r.rights = j["rights"].get<std::string>();
    if (j.contains("external_ids")) {
      for (const auto& [k, v] : j["external_ids"].items()) {
        const auto scheme = parse_id_scheme(k);
        if (!scheme) throw Error(ErrorCode::artifact_corrupt, "bad id scheme " + k);
        r.external_ids[*scheme] = v.get<std::string>();
      }
    }
    if (j.contains("materials")) {
      for (const auto& m : j["materials"]) {
        const auto kind = parse_material_kind(m.at("kind").get<std::string>());
        if (!kind) throw Error(ErrorCode::artifact_corrupt, "bad material kind");
        r.materials.push_back({*kind, m.at("url").get<std::string>()});
      }
    }
    if (j.contains("type_specific")) {
      r.type_specific = j["type_specific"].get<std::map<std::string, std::string>>();
    }
    if (j.contains("full_text")) r.full_text = j["full_text"].get<std::string>();
    if (j.contains("merged_from")) r.merged_from = j["merged_from"].get<std::vector<std::string>>();
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::artifact_corrupt, std::string("malformed record: ") + e.what());
  }
}

}  // namespace datanexus
