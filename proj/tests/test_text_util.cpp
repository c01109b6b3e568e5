#include <gtest/gtest.h>

#include <fstream>

#include "ragkit/json_lines.hpp"
#include "ragkit/text_util.hpp"
#include "helpers.hpp"

using namespace ragkit;

TEST(TextUtil, WordSpansSkipEveryWhitespaceKind) {
    const std::string t = "  alpha\tbeta\n\ngamma ";
    const auto spans = word_spans(t);
    ASSERT_EQ(spans.size(), 3u);
    EXPECT_EQ(t.substr(spans[0].start, spans[0].size()), "alpha");
    EXPECT_EQ(t.substr(spans[2].start, spans[2].size()), "gamma");
    EXPECT_EQ(count_words(""), 0u);
    EXPECT_EQ(count_words(" \n "), 0u);
}

TEST(TextUtil, NormalizeWhitespace) {
    EXPECT_EQ(normalize_whitespace("  a \n\n b\tc  "), "a b c");
    EXPECT_EQ(normalize_whitespace(""), "");
}

TEST(TextUtil, TrimSpan) {
    const std::string t = "  ab  ";
    EXPECT_EQ(trim_span(t, {0, t.size()}), (ByteSpan{2, 4}));
    EXPECT_EQ(trim(t), "ab");
}

TEST(TextUtil, Utf8DecodeNeverRejects) {
    EXPECT_EQ(decode_utf8("h\xC3\xA9"), (std::u32string{U'h', U'é'}));
    EXPECT_TRUE(is_valid_utf8("h\xC3\xA9"));
    EXPECT_FALSE(is_valid_utf8("\xFF"));
    EXPECT_EQ(decode_utf8("\xFF").size(), 1u);
}

TEST(TextUtil, SplitKeepsEmptyFields) {
    EXPECT_EQ(split("a,,b", ','), (std::vector<std::string>{"a", "", "b"}));
}

TEST(TextUtil, FnvMatchesPublishedVector) {
    EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
    EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
}

TEST(JsonLines, RoundTripAndLineNumbersInErrors) {
    testing_util::TempDir dir("jsonl");
    const auto path = dir.file("rows.jsonl");
    write_json_lines(path, {json{{"a", 1}}, json{{"b", "x"}}});
    const auto rows = read_json_lines(path);
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_EQ(rows[1]["b"], "x");

    {
        std::ofstream f(path);
        f << "{\"a\":1}\n\n{broken\n";
    }
    try {
        read_json_lines(path);
        FAIL() << "expected a parse error";
    } catch (const std::runtime_error& e) {
        EXPECT_NE(std::string(e.what()).find(":3"), std::string::npos) << e.what();
    }
}
