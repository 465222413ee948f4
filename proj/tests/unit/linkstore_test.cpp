#include <gtest/gtest.h>

#include "datanexus/linkstore.hpp"
#include "support/helpers.hpp"

using namespace datanexus;
using namespace datanexus::links;
using testing_support::make_record;

namespace {

const Timestamp kT0 = timestamp_from_ms(1'700'000'000'000);

Link make_link(std::string from, std::string to, LinkMethod m, double conf, std::string origin,
               std::optional<std::string> note = std::nullopt,
               std::optional<std::string> passage = std::nullopt) {
  Link l;
  l.from_id = std::move(from);
  l.to_id = std::move(to);
  l.method = m;
  l.confidence = conf;
  l.label = classify_link_label(conf);
  l.id = make_link_id(l.from_id, l.to_id, m);
  l.evidence_passage = std::move(passage);
  l.provenance.push_back({std::move(origin), m, kT0, std::move(note)});
  return l;
}

struct Corpus {
  std::map<std::string, Record> records;
  RecordDirectory dir;

  Corpus() {
    auto add = [&](Record r) {
      std::string id = r.id;
      records.emplace(std::move(id), std::move(r));
    };
    auto ds = make_record("dbk-ZA5900", Category::research_data, "ISSP 2010", 2012);
    ds.external_ids[IdScheme::doi] = "10.4232/1.11564";
    add(ds);
    auto pub = make_record("pub-123", Category::publication, "Attitudes", 2015);
    pub.merged_from = {"wos-9"};
    add(pub);
    add(make_record("pub-200", Category::publication, "Beliefs", 2016));
    add(make_record("pub-300", Category::publication, "Climate", 2017));
    add(make_record("zis-1", Category::instrument_tool, "Scale", 2010));
    add(make_record("web-1", Category::web_page, "Lonely page"));
    dir.add_all(records);
  }
};

std::vector<std::string> lines(std::initializer_list<const char*> rows) {
  return {rows.begin(), rows.end()};
}

}  // namespace

TEST(ClassifyLinkLabel, ExactOneIsUsed) {
  EXPECT_EQ(classify_link_label(1.0), LinkLabel::used);
  EXPECT_EQ(classify_link_label(0.73), LinkLabel::mentioned);
  EXPECT_EQ(classify_link_label(0.9999), LinkLabel::mentioned);
  EXPECT_EQ(classify_link_label(0.0), LinkLabel::mentioned);
  EXPECT_EQ(classify_link_label(std::nextafter(1.0, 0.0)), LinkLabel::mentioned);
}

TEST(ClassifyLinkLabel, OutOfRangeIsAnError) {
  for (double c : {-0.01, 1.0000001, std::nan(""), std::numeric_limits<double>::infinity()}) {
    try {
      classify_link_label(c);
      FAIL() << c;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::invalid_confidence);
    }
  }
}

TEST(LinkId, StableHashOfEndpointsAndMethod) {
  EXPECT_EQ(make_link_id("a", "b", LinkMethod::manual), make_link_id("a", "b", LinkMethod::manual));
  EXPECT_NE(make_link_id("a", "b", LinkMethod::manual), make_link_id("a", "b", LinkMethod::automatic));
  EXPECT_NE(make_link_id("a", "b", LinkMethod::manual), make_link_id("b", "a", LinkMethod::manual));
  EXPECT_NE(make_link_id("ab", "c", LinkMethod::manual), make_link_id("a", "bc", LinkMethod::manual));
  EXPECT_EQ(make_link_id("a", "b", LinkMethod::manual), "link-" + fnv1a_hex("a\x1f" "b\x1fmanual"));
}

TEST(ImportLinks, ManualRowIsForcedToFullConfidence) {
  Corpus c;
  auto r = import_link_records(
      lines({R"({"from":"doi:10.4232/1.11564","to":"pub-123","method":"manual","confidence":0.3})"}),
      "bib", {&c.dir, nullptr, kT0});
  ASSERT_EQ(r.links.size(), 1u);
  const auto& l = r.links[0];
  EXPECT_EQ(l.from_id, "dbk-ZA5900");
  EXPECT_EQ(l.from_category, Category::research_data);
  EXPECT_EQ(l.to_category, Category::publication);
  EXPECT_DOUBLE_EQ(l.confidence, 1.0);
  EXPECT_EQ(l.label, LinkLabel::used);
  ASSERT_EQ(l.provenance.size(), 1u);
  EXPECT_EQ(l.provenance[0].origin, "bib");
  EXPECT_EQ(l.provenance[0].imported_at, kT0);
}

TEST(ImportLinks, AutomaticRowKeepsConfidenceAndPassage) {
  Corpus c;
  auto r = import_link_records(
      lines({R"({"from":"pub-123","to":"dbk-ZA5900","method":"automatic","confidence":0.5,"passage":"we used the ISSP 2010"})"}),
      "infolink", {&c.dir, nullptr, kT0});
  ASSERT_EQ(r.links.size(), 1u);
  EXPECT_DOUBLE_EQ(r.links[0].confidence, 0.5);
  EXPECT_EQ(r.links[0].label, LinkLabel::mentioned);
  EXPECT_EQ(r.links[0].evidence_passage, "we used the ISSP 2010");
}

TEST(ImportLinks, RejectsWithReasons) {
  Corpus c;
  auto r = import_link_records(
      lines({R"({"from":"pub-123","to":"dbk-ZA5900","method":"automatic","confidence":1.2})",
             R"({"from":"pub-123","to":"dbk-ZA5900","method":"automatic"})",
             R"({"from":"pub-123","to":"dbk-ZA5900","method":"guess"})",
             R"({"from":"pub-999","to":"dbk-ZA5900","method":"manual"})",
             R"({"from":"pub-123","to":"wos-9","method":"manual"})", "not json", "",
             R"({"from":"doi:10.1/unknown","to":"dbk-ZA5900","method":"manual"})",
             R"({"from":"pub-123","to":"dbk-ZA5900","method":"automatic","confidence":"high"})"}),
      "o", {&c.dir, nullptr, kT0});
  EXPECT_TRUE(r.links.empty());
  std::vector<std::string> reasons;
  for (const auto& rej : r.rejects) reasons.push_back(rej.reason);
  EXPECT_EQ(reasons, (std::vector<std::string>{"invalid-confidence", "invalid-confidence", "invalid-method",
                                               "unresolved-endpoint", "self-link", "malformed",
                                               "unresolved-endpoint", "invalid-confidence"}));
  EXPECT_EQ(r.rejects[5].line, 6u);
  EXPECT_THROW(import_link_records({}, "", {&c.dir, nullptr, kT0}), Error);
}

TEST(ImportLinks, UnknownReferencesGoToThePool) {
  Corpus c;
  LiteraturePool pool;
  auto r = import_link_records(
      lines({R"({"from":"doi:10.1/new","to":"dbk-ZA5900","method":"manual"})",
             R"({"from_ref":{"title":"Social capital revisited","year":2009,"creators":["Lin, N."]},"to":"dbk-ZA5900","method":"manual"})",
             R"({"from_ref":{"title":"Social Capital, Revisited!","year":2009,"creators":["Lin, Nan"]},"to":"zis-1","method":"manual"})",
             R"({"from_ref":{"year":2009},"to":"zis-1","method":"manual"})"}),
      "bib", {&c.dir, &pool, kT0});
  ASSERT_EQ(r.links.size(), 3u);
  EXPECT_EQ(pool.size(), 2u);
  EXPECT_EQ(r.links[0].from_id, "pool-1");
  EXPECT_EQ(r.links[1].from_id, "pool-2");
  EXPECT_EQ(r.links[2].from_id, "pool-2");
  ASSERT_EQ(r.rejects.size(), 1u);
  EXPECT_EQ(r.rejects[0].reason, "unresolved-endpoint");
}

TEST(LiteraturePool, MatchOrCreate) {
  LiteraturePool pool;
  ReferenceMetadata doi_ref{"A title", 2001, {"Doe, J."}, "10.5/abc"};
  const auto id = resolve_publication_reference(doi_ref, pool);
  EXPECT_EQ(id, "pool-1");
  ReferenceMetadata same_doi{"Other title", std::nullopt, {}, "https://doi.org/10.5/ABC"};
  EXPECT_EQ(resolve_publication_reference(same_doi, pool), id);
  EXPECT_EQ(pool.size(), 1u);

  ReferenceMetadata unmatched{"Something new", 2020, {"Roe, R."}, std::nullopt};
  EXPECT_EQ(resolve_publication_reference(unmatched, pool), "pool-2");
  EXPECT_EQ(pool.size(), 2u);
  EXPECT_EQ(pool.records().at("pool-2").category, Category::publication);

  try {
    resolve_publication_reference({"  ", 2020, {}, std::nullopt}, pool);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::unresolvable_reference);
  }
}

TEST(LiteraturePool, CompositeMatchAgreesWithBruteForce) {
  LiteraturePool pool;
  const std::vector<ReferenceMetadata> seeds = {
      {"Social capital revisited", 2009, {"Lin, N."}, std::nullopt},
      {"Social capital revisited", 2010, {"Lin, N."}, std::nullopt},
      {"Trust in institutions", 2009, {"Putnam, R."}, std::nullopt},
  };
  for (const auto& s : seeds) resolve_publication_reference(s, pool);
  ASSERT_EQ(pool.size(), 3u);

  // Brute force: lowercase, keep letters/digits/spaces, collapse spaces.
  auto norm = [](const std::string& s) {
    std::string out;
    for (char ch : s) {
      if (std::isalnum(static_cast<unsigned char>(ch))) {
        out += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
      } else if (ch == ' ' && !out.empty() && out.back() != ' ') {
        out += ' ';
      }
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    return out;
  };
  auto surname = [&](const std::string& c) { return norm(c.substr(0, c.find(','))); };
  const std::vector<ReferenceMetadata> probes = {
      {"SOCIAL CAPITAL: Revisited", 2009, {"Lin, Nan"}, std::nullopt},
      {"Social capital revisited", 2011, {"Lin, N."}, std::nullopt},
      {"trust in institutions.", 2009, {"Putnam, Robert"}, std::nullopt},
      {"Trust in institutions", 2009, {"Other, A."}, std::nullopt},
  };
  for (const auto& p : probes) {
    std::optional<std::string> expected;
    for (const auto& [id, rec] : pool.records()) {
      if (norm(rec.title) == norm(p.title) && rec.year == p.year &&
          surname(rec.creators.front()) == surname(p.creators.front())) {
        expected = id;
      }
    }
    const auto before = pool.size();
    const auto got = resolve_publication_reference(p, pool);
    if (expected) {
      EXPECT_EQ(got, *expected) << p.title;
      EXPECT_EQ(pool.size(), before);
    } else {
      EXPECT_EQ(pool.size(), before + 1) << p.title;
    }
  }
}

TEST(LiteraturePool, CounterContinuesAfterReload) {
  LiteraturePool pool;
  resolve_publication_reference({"One", 2001, {}, std::nullopt}, pool);
  resolve_publication_reference({"Two", 2002, {}, std::nullopt}, pool);
  LiteraturePool reloaded(pool.records());
  EXPECT_EQ(resolve_publication_reference({"Two", 2002, {}, std::nullopt}, reloaded), "pool-2");
  EXPECT_EQ(resolve_publication_reference({"Three", 2003, {}, std::nullopt}, reloaded), "pool-3");
}

TEST(MergeDuplicateLinks, SamePairFromTwoOriginsKeepsBothProvenances) {
  auto merged = merge_duplicate_links({make_link("a", "b", LinkMethod::manual, 1.0, "bib1"),
                                       make_link("a", "b", LinkMethod::manual, 1.0, "bib2")});
  ASSERT_EQ(merged.size(), 1u);
  EXPECT_EQ(merged[0].provenance.size(), 2u);
}

TEST(MergeDuplicateLinks, MethodIsPartOfTheKey) {
  auto merged = merge_duplicate_links({make_link("a", "b", LinkMethod::manual, 1.0, "bib"),
                                       make_link("a", "b", LinkMethod::automatic, 0.4, "ie")});
  EXPECT_EQ(merged.size(), 2u);
}

TEST(MergeDuplicateLinks, IdenticalRowsCollapse) {
  auto l = make_link("a", "b", LinkMethod::manual, 1.0, "bib", "note");
  auto merged = merge_duplicate_links({l, l, l});
  ASSERT_EQ(merged.size(), 1u);
  EXPECT_EQ(merged[0].provenance.size(), 1u);
}

TEST(MergeDuplicateLinks, MaxConfidenceAndItsPassage) {
  auto merged = merge_duplicate_links(
      {make_link("a", "b", LinkMethod::automatic, 0.3, "x", std::nullopt, "low"),
       make_link("a", "b", LinkMethod::automatic, 0.8, "y", std::nullopt, "first high"),
       make_link("a", "b", LinkMethod::automatic, 0.8, "z", std::nullopt, "second high")});
  ASSERT_EQ(merged.size(), 1u);
  EXPECT_DOUBLE_EQ(merged[0].confidence, 0.8);
  EXPECT_EQ(merged[0].evidence_passage, "first high");
  EXPECT_EQ(merged[0].label, LinkLabel::mentioned);
  EXPECT_EQ(merged[0].provenance.size(), 3u);
}

TEST(LinkSummaries, CountsAndLabelsForDataset) {
  Corpus c;
  std::vector<Link> links = {
      make_link("pub-123", "dbk-ZA5900", LinkMethod::manual, 1.0, "bib"),
      make_link("pub-200", "dbk-ZA5900", LinkMethod::manual, 1.0, "bib"),
      make_link("pub-300", "dbk-ZA5900", LinkMethod::automatic, 0.5, "ie", std::nullopt, "we used the ISSP 2010"),
  };
  for (auto& l : links) {
    l.from_category = Category::publication;
    l.to_category = Category::research_data;
  }
  auto built = build_link_summaries(c.dir, links);
  const auto& s = built.summaries.at("dbk-ZA5900");
  EXPECT_EQ(s.count(Category::publication), 3u);
  EXPECT_EQ(s.used, 2u);
  EXPECT_EQ(s.mentioned, 1u);
  ASSERT_EQ(s.items.size(), 3u);
  EXPECT_EQ(s.items[0].record_id, "pub-123");  // used first, then title
  EXPECT_EQ(s.items[1].record_id, "pub-200");
  EXPECT_EQ(s.items[2].record_id, "pub-300");
  EXPECT_EQ(s.items[2].evidence_passage, "we used the ISSP 2010");
  EXPECT_FALSE(s.items[0].outgoing);

  const auto& lonely = built.summaries.at("web-1");
  EXPECT_EQ(lonely.total(), 0u);
  for (Category cat : kAllCategories) EXPECT_EQ(lonely.count(cat), 0u);

  const auto& back = built.summaries.at("pub-300");
  ASSERT_EQ(back.items.size(), 1u);
  EXPECT_EQ(back.items[0].record_id, "dbk-ZA5900");
  EXPECT_TRUE(back.items[0].outgoing);
}

TEST(LinkSummaries, RedirectsAndDanglingEndpoints) {
  Corpus c;
  std::vector<Link> links = {
      make_link("wos-9", "dbk-ZA5900", LinkMethod::manual, 1.0, "bib"),
      make_link("pub-123", "dbk-ZA5900", LinkMethod::manual, 1.0, "other"),
      make_link("gone-1", "dbk-ZA5900", LinkMethod::manual, 1.0, "bib"),
      make_link("wos-9", "pub-123", LinkMethod::manual, 1.0, "bib"),
  };
  auto built = build_link_summaries(c.dir, links);
  ASSERT_EQ(built.live_links.size(), 1u);
  EXPECT_EQ(built.live_links[0].from_id, "pub-123");
  EXPECT_EQ(built.live_links[0].provenance.size(), 2u);
  ASSERT_EQ(built.dangling.size(), 2u);
  EXPECT_EQ(built.dangling[0].reason, "missing-from:gone-1");
  EXPECT_EQ(built.dangling[1].reason, "self-link-after-merge");
}

TEST(LinkSummaries, SymmetricClosure) {
  Corpus c;
  std::vector<Link> links = {
      make_link("pub-123", "dbk-ZA5900", LinkMethod::manual, 1.0, "bib"),
      make_link("pub-123", "dbk-ZA5900", LinkMethod::automatic, 0.6, "ie"),
      make_link("dbk-ZA5900", "zis-1", LinkMethod::manual, 1.0, "cur"),
      make_link("pub-200", "zis-1", LinkMethod::automatic, 0.2, "ie"),
  };
  auto built = build_link_summaries(c.dir, links);
  std::size_t total = 0;
  for (const auto& [id, s] : built.summaries) {
    std::size_t by_cat = 0;
    for (Category cat : kAllCategories) by_cat += s.count(cat);
    EXPECT_EQ(by_cat, s.items.size());
    EXPECT_EQ(s.used + s.mentioned, s.items.size());
    total += s.items.size();
    for (const auto& item : s.items) {
      const auto& other = built.summaries.at(item.record_id);
      EXPECT_TRUE(std::any_of(other.items.begin(), other.items.end(), [&](const LinkedItem& x) {
        return x.record_id == id && x.link_id == item.link_id && x.outgoing != item.outgoing;
      }));
    }
  }
  EXPECT_EQ(total, 2 * built.live_links.size());
}

TEST(LinkJson, RoundTrip) {
  auto l = make_link("a-1", "b-2", LinkMethod::automatic, 0.25, "ie", "n", "passage");
  l.from_category = Category::publication;
  l.to_category = Category::research_data;
  EXPECT_EQ(link_to_json(link_from_json(link_to_json(l))), link_to_json(l));
  EXPECT_THROW(link_from_json(json{{"from", "a"}}), Error);
}

TEST(LinkJson, SummaryRoundTrip) {
  Corpus c;
  auto built = build_link_summaries(
      c.dir, {make_link("pub-300", "dbk-ZA5900", LinkMethod::automatic, 0.5, "ie", std::nullopt, "p")});
  for (const auto& [id, s] : built.summaries) {
    EXPECT_EQ(summary_to_json(summary_from_json(summary_to_json(s))), summary_to_json(s)) << id;
  }
}
