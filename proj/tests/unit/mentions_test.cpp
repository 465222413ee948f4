#include <gtest/gtest.h>

#include "datanexus/io.hpp"
#include "datanexus/mentions.hpp"
#include "support/helpers.hpp"

using namespace datanexus;
using namespace datanexus::mentions;

namespace {

Registry fixture_registry() {
  return parse_registry(io::split_lines(io::read_file(testing_support::fixture("registry.jsonl"))));
}

Registry one_alias_registry(const std::string& alias, int k) {
  std::vector<DatasetEntry> entries;
  for (int i = 0; i < k; ++i) {
    entries.push_back({"ds-" + std::to_string(i), "Survey Title " + std::to_string(i), {alias}, {}});
  }
  return Registry(std::move(entries));
}

}  // namespace

TEST(ExtractMentions, IsspExampleCapturesYearAndPassage) {
  auto reg = fixture_registry();
  AliasTable aliases(reg);
  const std::string text = "For our analysis we used the ISSP 2010 cumulation.";
  auto ms = extract_mentions(text, aliases, "doc");
  ASSERT_EQ(ms.size(), 1u);
  EXPECT_EQ(ms[0].surface, "ISSP");
  ASSERT_TRUE(ms[0].year_token);
  EXPECT_EQ(*ms[0].year_token, "2010");
  EXPECT_NE(ms[0].context_passage.find("we used the ISSP 2010"), std::string::npos);
  EXPECT_EQ(text.substr(ms[0].start, ms[0].end - ms[0].start), "ISSP");
  EXPECT_EQ(ms[0].document_id, "doc");
}

TEST(ExtractMentions, NoAliasesInTextGivesNothing) {
  AliasTable aliases(fixture_registry());
  EXPECT_TRUE(extract_mentions("No registered dataset is named here.", aliases).empty());
  EXPECT_TRUE(extract_mentions("", aliases).empty());
}

TEST(ExtractMentions, WordBoundaryRule) {
  AliasTable aliases(fixture_registry());
  EXPECT_TRUE(extract_mentions("MISSPELLED", aliases).empty());
  EXPECT_TRUE(extract_mentions("the ISSPX and XISSP files", aliases).empty());
  EXPECT_EQ(extract_mentions("(ISSP)", aliases).size(), 1u);
}

TEST(ExtractMentions, CaseInsensitive) {
  AliasTable aliases(fixture_registry());
  auto ms = extract_mentions("data from the allbus were used", aliases);
  ASSERT_EQ(ms.size(), 1u);
  EXPECT_EQ(ms[0].surface, "allbus");
  EXPECT_FALSE(ms[0].year_token);
}

TEST(ExtractMentions, LongestAliasWinsOnOverlap) {
  AliasTable aliases(fixture_registry());
  // "ALLBUS 2016 German General Social Survey" is the full title and covers the alias.
  auto ms = extract_mentions("We use ALLBUS 2016 German General Social Survey data.", aliases);
  ASSERT_EQ(ms.size(), 1u);
  EXPECT_EQ(ms[0].surface, "ALLBUS 2016 German General Social Survey");
}

TEST(ExtractMentions, MultiTokenAliasWithPunctuation) {
  AliasTable aliases(fixture_registry());
  auto ms = extract_mentions("Respondents of EB 71.3 in 2009 were asked.", aliases);
  ASSERT_EQ(ms.size(), 1u);
  EXPECT_EQ(ms[0].surface, "EB 71.3");
  ASSERT_TRUE(ms[0].year_token);
  EXPECT_EQ(*ms[0].year_token, "2009");
}

TEST(ExtractMentions, YearMustFollowWithinTwoTokens) {
  AliasTable aliases(fixture_registry());
  auto near = extract_mentions("the ISSP wave of 2010", aliases);
  ASSERT_EQ(near.size(), 1u);
  EXPECT_FALSE(near[0].year_token);
  auto two = extract_mentions("the ISSP module 2010", aliases);
  ASSERT_EQ(two.size(), 1u);
  ASSERT_TRUE(two[0].year_token);
  auto bad = extract_mentions("the ISSP 1750 data", aliases);
  ASSERT_EQ(bad.size(), 1u);
  EXPECT_FALSE(bad[0].year_token);
}

TEST(ExtractMentions, PassageClipsAtPeriods) {
  AliasTable aliases(fixture_registry());
  auto ms = extract_mentions("First sentence. Second uses ISSP data. Third sentence.", aliases);
  ASSERT_EQ(ms.size(), 1u);
  EXPECT_EQ(ms[0].context_passage, "Second uses ISSP data.");
}

TEST(ExtractMentions, PassageIsBoundedInCodePoints) {
  AliasTable aliases(fixture_registry());
  const std::string pad(500, 'x');
  const std::string text = pad + " ISSP " + pad;
  auto ms = extract_mentions(text, aliases);
  ASSERT_EQ(ms.size(), 1u);
  EXPECT_LE(text::count_code_points(ms[0].context_passage), 2 * kPassageRadius + 4);
  EXPECT_NE(ms[0].context_passage.find("ISSP"), std::string::npos);
}

TEST(ResolveMention, FixtureAmbiguousIssp) {
  auto reg = fixture_registry();
  AliasTable aliases(reg);
  auto ms = extract_mentions("we used the ISSP 2010", aliases);
  ASSERT_EQ(ms.size(), 1u);
  auto cs = resolve_mention(ms[0], reg, aliases);
  ASSERT_EQ(cs.size(), 2u);
  EXPECT_EQ(cs[0].dataset_id, "dbk-ZA5900");
  EXPECT_DOUBLE_EQ(cs[0].similarity, 1.0);
  EXPECT_DOUBLE_EQ(cs[0].confidence, 0.5);
  EXPECT_EQ(cs[1].dataset_id, "dbk-ZA6900");
  const double sim = text::edit_similarity("issp 2010", "issp 2016 role of government v");
  EXPECT_DOUBLE_EQ(cs[1].similarity, sim);
  EXPECT_DOUBLE_EQ(cs[1].confidence, sim / 2.0);
  for (const auto& c : cs) EXPECT_LE(c.confidence, c.similarity);
}

TEST(ResolveMention, SingleExactCandidateIsCertain) {
  auto reg = fixture_registry();
  AliasTable aliases(reg);
  auto ms = extract_mentions("relies on the ALLBUS 2016 and earlier waves", aliases);
  ASSERT_EQ(ms.size(), 1u);
  auto cs = resolve_mention(ms[0], reg, aliases);
  ASSERT_EQ(cs.size(), 1u);
  EXPECT_EQ(cs[0].dataset_id, "dbk-ZA5250");
  EXPECT_DOUBLE_EQ(cs[0].confidence, 1.0);
}

TEST(ResolveMention, OneOverKForTwoExactDatasets) {
  for (int k : {1, 2}) {
    auto reg = one_alias_registry("PANEL", k);
    AliasTable aliases(reg);
    auto ms = extract_mentions("based on PANEL data", aliases);
    ASSERT_EQ(ms.size(), 1u);
    auto cs = resolve_mention(ms[0], reg, aliases);
    ASSERT_EQ(cs.size(), static_cast<std::size_t>(k));
    for (const auto& c : cs) EXPECT_DOUBLE_EQ(c.confidence, 1.0 / k);
  }
}

TEST(ResolveMention, UnknownSurfaceGivesNoCandidates) {
  auto reg = fixture_registry();
  AliasTable aliases(reg);
  Mention m;
  m.surface = "NOTADATASET";
  EXPECT_TRUE(resolve_mention(m, reg, aliases).empty());
}

TEST(Registry, ParseErrorsNameTheLine) {
  try {
    parse_registry({R"({"id":"a","title":"A"})", "{not json"});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::invalid_argument);
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
  EXPECT_THROW(parse_registry({R"({"title":"no id"})"}), Error);
  EXPECT_EQ(parse_registry({"", R"({"id":"a","title":"A"})"}).entries().size(), 1u);
}

TEST(AliasTable, KeysAreNormalized) {
  AliasTable aliases(fixture_registry());
  EXPECT_TRUE(aliases.lookup("issp"));
  EXPECT_TRUE(aliases.lookup("issp 2010 environment iii 2010"));
  EXPECT_FALSE(aliases.lookup("ISSP"));
  EXPECT_FALSE(aliases.lookup("issp 2010"));
  EXPECT_EQ(alias_key("  EB   71.3 "), "eb 71 3");
}

TEST(ExtractLinks, FixtureFullTexts) {
  auto reg = fixture_registry();
  AliasTable aliases(reg);
  std::vector<Document> docs;
  for (const char* id : {"ssoar-1001", "ssoar-1002", "ssoar-1003"}) {
    docs.push_back({id, io::read_file(testing_support::fixture(std::string("fulltexts/") + id + ".txt"))});
  }
  auto links = extract_links(docs, reg, aliases);
  ASSERT_EQ(links.size(), 3u);
  EXPECT_EQ(links[0].document_id, "ssoar-1001");
  EXPECT_EQ(links[0].dataset_id, "dbk-ZA5900");
  EXPECT_DOUBLE_EQ(links[0].confidence, 0.5);
  EXPECT_NE(links[0].passage.find("we used the ISSP 2010"), std::string::npos);
  EXPECT_EQ(links[1].dataset_id, "dbk-ZA6900");
  EXPECT_EQ(links[2].document_id, "ssoar-1002");
  EXPECT_EQ(links[2].dataset_id, "dbk-ZA5250");
  EXPECT_DOUBLE_EQ(links[2].confidence, 1.0);

  auto again = extract_links(docs, reg, aliases);
  ASSERT_EQ(again.size(), links.size());
  for (std::size_t i = 0; i < links.size(); ++i) {
    EXPECT_EQ(again[i].dataset_id, links[i].dataset_id);
    EXPECT_EQ(again[i].passage, links[i].passage);
    EXPECT_EQ(again[i].confidence, links[i].confidence);
  }
}

TEST(ExtractLinks, ImportRowShape) {
  ExtractedLink l{"ssoar-1", "dbk-ZA1", 0.5, "we used it"};
  const json row = to_import_row(l);
  EXPECT_EQ(row["method"], "automatic");
  EXPECT_EQ(row["from"], "ssoar-1");
  EXPECT_EQ(row["to"], "dbk-ZA1");
  EXPECT_EQ(row["passage"], "we used it");
}
