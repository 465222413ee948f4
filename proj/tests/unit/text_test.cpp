#include <gtest/gtest.h>

#include "datanexus/hash.hpp"
#include "datanexus/io.hpp"
#include "datanexus/text.hpp"
#include "datanexus/timestamp.hpp"
#include "support/helpers.hpp"

using namespace datanexus;

namespace {

std::vector<std::string> token_texts(std::string_view s) {
  std::vector<std::string> out;
  for (const auto& t : text::tokenize_with_offsets(s)) out.push_back(t.text);
  return out;
}

}  // namespace

TEST(Tokenize, SplitsOnPunctuationAndFoldsCase) {
  EXPECT_EQ(token_texts("Gender Roles"), (std::vector<std::string>{"gender", "roles"}));
  EXPECT_EQ(token_texts("ISSP 2012 – Family"), (std::vector<std::string>{"issp", "2012", "family"}));
  EXPECT_TRUE(token_texts("").empty());
  EXPECT_TRUE(token_texts(" ,;  -- ").empty());
}

TEST(Tokenize, FoldsNonAsciiLetters) {
  EXPECT_EQ(token_texts("MÜLLER Straße ΑΘΗΝΑ"), (std::vector<std::string>{"müller", "straße", "αθηνα"}));
  EXPECT_EQ(token_texts("«Österreich»"), (std::vector<std::string>{"österreich"}));
}

TEST(Tokenize, OffsetsAreByteRangesIntoTheSource) {
  const std::string s = "Über die ISSP-Daten";
  for (const auto& t : text::tokenize_with_offsets(s)) {
    ASSERT_LT(t.begin, t.end);
    ASSERT_LE(t.end, s.size());
    EXPECT_EQ(text::normalize_text(s.substr(t.begin, t.end - t.begin)), t.text);
  }
}

TEST(NormalizeText, DropsPunctuationAndCollapsesSpace) {
  EXPECT_EQ(text::normalize_text("  Family   Survey: 2012! "), "family survey 2012");
  EXPECT_EQ(text::normalize_text("A.B"), "ab");
  EXPECT_EQ(text::normalize_text(""), "");
}

TEST(EditSimilarity, BoundsAndKnownValues) {
  EXPECT_DOUBLE_EQ(text::edit_similarity("abc", "abc"), 1.0);
  EXPECT_DOUBLE_EQ(text::edit_similarity("", ""), 1.0);
  EXPECT_DOUBLE_EQ(text::edit_similarity("abc", "xyz"), 0.0);
  // kitten -> sitting needs 3 edits over 7 code points.
  EXPECT_DOUBLE_EQ(text::edit_similarity("kitten", "sitting"), 1.0 - 3.0 / 7.0);
  EXPECT_DOUBLE_EQ(text::edit_similarity("ä", "a"), 0.0);
}

TEST(Utf8, CodePointNavigation) {
  const std::string s = "aé€😀";
  EXPECT_EQ(text::count_code_points(s), 4u);
  EXPECT_EQ(text::advance_code_points(s, 0, 2), 3u);
  EXPECT_EQ(text::advance_code_points(s, 0, 10), s.size());
  EXPECT_EQ(text::retreat_code_points(s, s.size(), 1), 6u);
  EXPECT_EQ(text::utf8_floor(s, 2), 1u);
}

TEST(Utf8, InvalidBytesDecodeToReplacement) {
  const std::string bad = "a\xff" "b";
  EXPECT_EQ(token_texts(bad), (std::vector<std::string>{"a", "b"}));
}

TEST(Timestamp, FormatAndParseRoundTrip) {
  auto ts = parse_timestamp("2024-03-01T10:06:30Z");
  ASSERT_TRUE(ts);
  EXPECT_EQ(format_timestamp(*ts), "2024-03-01T10:06:30Z");
  auto ms = parse_timestamp("2024-03-01 10:06:30.250");
  ASSERT_TRUE(ms);
  EXPECT_EQ(format_timestamp(*ms), "2024-03-01T10:06:30.250Z");
  auto offset = parse_timestamp("2024-03-01T12:06:30+02:00");
  ASSERT_TRUE(offset);
  EXPECT_EQ(*offset, *ts);
  EXPECT_EQ(format_timestamp(*parse_timestamp("2024-02-29")), "2024-02-29T00:00:00Z");
  EXPECT_EQ(format_timestamp(timestamp_from_ms(0)), "1970-01-01T00:00:00Z");
}

TEST(Timestamp, RejectsMalformedInput) {
  EXPECT_FALSE(parse_timestamp(""));
  EXPECT_FALSE(parse_timestamp("yesterday"));
  EXPECT_FALSE(parse_timestamp("2024-13-01"));
  EXPECT_FALSE(parse_timestamp("2024-03-01T25:00:00Z"));
  EXPECT_FALSE(parse_timestamp("2024-03-01T10:00:00Zjunk"));
}

TEST(Hash, Fnv1aKnownVectors) {
  EXPECT_EQ(fnv1a_hex(""), "cbf29ce484222325");
  EXPECT_EQ(fnv1a_hex("a"), "af63dc4c8601ec8c");
  EXPECT_EQ(fnv1a_hex("foobar"), "85944171f73967e8");
}

TEST(Io, WriteFileIsAtomicAndCreatesDirectories) {
  testing_support::TempDir dir;
  const auto path = dir / "nested/deeper/file.txt";
  io::write_file(path, "first\n");
  io::write_file(path, "second\n");
  EXPECT_EQ(io::read_file(path), "second\n");
  std::size_t entries = 0;
  for ([[maybe_unused]] const auto& e : std::filesystem::directory_iterator(path.parent_path())) ++entries;
  EXPECT_EQ(entries, 1u);
}

TEST(Io, MissingFileIsNamed) {
  try {
    io::read_file("/nonexistent/datanexus/file.jsonl");
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::artifact_missing);
    EXPECT_NE(std::string(e.what()).find("/nonexistent/datanexus/file.jsonl"), std::string::npos);
  }
}

TEST(Io, SplitLinesHandlesCrLfAndTrailingNewline) {
  EXPECT_EQ(io::split_lines("a\r\nb\n\nc"), (std::vector<std::string>{"a", "b", "", "c"}));
  EXPECT_EQ(io::split_lines("a\n"), (std::vector<std::string>{"a"}));
  EXPECT_TRUE(io::split_lines("").empty());
}
