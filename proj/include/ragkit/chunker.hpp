#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ragkit/corpus.hpp"
#include "ragkit/text_util.hpp"

namespace ragkit::chunking {

enum class SpanKind { latex_inline, latex_display, markdown_table };

std::string_view to_string(SpanKind kind);

struct ProtectedSpan {
    ByteSpan span;
    SpanKind kind = SpanKind::latex_inline;
};

struct Section {
    std::vector<std::string> path;  // heading titles from outermost to this one
    ByteSpan span;                  // heading line through the byte before the next heading
};

struct DocumentStructure {
    std::vector<Section> sections;
    std::vector<ByteSpan> paragraphs;
    std::vector<ByteSpan> sentences;
    std::vector<ProtectedSpan> protected_spans;  // sorted, non-overlapping
    std::vector<std::string> warnings;
};

// Headings are Markdown "#" lines and numbered lines such as "2. Methods" or
// "2.1 Study area". Paragraphs break at blank lines and sentences at
// terminal punctuation, never inside a protected span.
DocumentStructure detect_structure(std::string_view text);

struct ChunkConfig {
    std::size_t target_words = 512;
    std::size_t hard_max_words = 640;
    bool sentence_fallback = true;

    void validate() const;
    static ChunkConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

struct Chunk {
    std::string chunk_id;
    std::string doc_id;
    std::string text;
    std::size_t word_count = 0;
    std::vector<std::string> section_path;
    corpus::Metadata metadata;
    ByteSpan span;          // location in the source document
    bool oversize = false;  // a lone protected span larger than hard_max_words
};

struct ChunkedDocument {
    std::vector<Chunk> chunks;
    std::vector<std::string> warnings;
};

std::string make_chunk_id(std::string_view doc_id, std::size_t index);

ChunkedDocument chunk_document(const corpus::CleanDocument& doc, const ChunkConfig& config = {});

struct FilterConfig {
    std::size_t min_words = 20;
    double min_alpha_ratio = 0.4;
    double min_distinct_ratio = 0.2;

    static FilterConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

struct DroppedChunk {
    Chunk chunk;
    std::string reason;  // "too-short" | "low-alpha" | "low-diversity"
};

struct FilterResult {
    std::vector<Chunk> kept;
    std::vector<DroppedChunk> dropped;
};

// Empty string when the chunk passes every heuristic.
std::string uninformative_reason(std::string_view text, const FilterConfig& config = {});

FilterResult filter_uninformative(std::vector<Chunk> chunks, const FilterConfig& config = {});

nlohmann::json to_json(const Chunk& chunk);
Chunk chunk_from_json(const nlohmann::json& j);

}  // namespace ragkit::chunking
