#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace ragkit {

/// Half-open byte range into some source text.
struct ByteSpan {
    std::size_t start = 0;
    std::size_t end = 0;

    std::size_t size() const { return end - start; }
    bool empty() const { return end <= start; }
    bool contains(const ByteSpan& other) const { return start <= other.start && other.end <= end; }
    bool intersects(const ByteSpan& other) const { return start < other.end && other.start < end; }
    bool operator==(const ByteSpan&) const = default;
};

inline bool is_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}
inline bool is_digit(char c) { return c >= '0' && c <= '9'; }
inline bool is_upper(char c) { return c >= 'A' && c <= 'Z'; }
inline bool is_lower(char c) { return c >= 'a' && c <= 'z'; }
inline bool is_alpha(char c) { return is_upper(c) || is_lower(c); }
inline bool is_alnum(char c) { return is_alpha(c) || is_digit(c); }

// A "word" is a maximal run of non-whitespace bytes.
std::vector<ByteSpan> word_spans(std::string_view text);
std::size_t count_words(std::string_view text);

// Collapses every whitespace run to one space and trims both ends.
std::string normalize_whitespace(std::string_view text);

std::string_view trim(std::string_view text);
// Narrows [start, end) so it neither begins nor ends on whitespace.
ByteSpan trim_span(std::string_view text, ByteSpan span);

std::string to_lower_ascii(std::string_view text);

bool is_valid_utf8(std::string_view text);

// Invalid bytes decode to U+DC80..U+DCFF so that no input is rejected.
std::u32string decode_utf8(std::string_view text);

std::vector<std::string> split(std::string_view text, char sep);

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);

}  // namespace ragkit
