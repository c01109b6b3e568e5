#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace ragkit::corpus {

using Metadata = std::map<std::string, std::string>;

enum class FormatHint { html_extracted, pdf_extracted, plain };

std::string_view to_string(FormatHint hint);
FormatHint format_hint_from_string(std::string_view name);

struct RawDocument {
    std::string id;
    std::string text;
    std::string source;
    FormatHint format_hint = FormatHint::plain;
    Metadata metadata;  // doi, url, title, journal, ... all optional
};

struct PassRecord {
    std::string pass;
    std::size_t edits = 0;

    bool operator==(const PassRecord&) const = default;
};

struct CleanDocument {
    std::string id;
    std::string text;
    std::string source;
    Metadata metadata;
    std::vector<PassRecord> cleaning_log;
};

struct CleaningConfig {
    // Exact tags deleted by the artifact pass, in addition to the
    // angle-bracketed ALL-CAPS rule below.
    std::vector<std::string> tag_literals{"<WARNING>", "<ERROR>"};
    bool strip_allcaps_tags = true;

    std::size_t ocr_min_span = 8;
    std::size_t ocr_max_gap = 2;
    std::size_t ocr_max_span = 1024;

    double low_info_symbol_ratio = 0.8;
    std::size_t low_info_min_length = 5;

    bool anonymize_emails = true;

    static CleaningConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

struct PassResult {
    std::string text;
    std::size_t edits = 0;
};

// Pass 1: deletes configured residual tags. Repeats until no tag remains, so
// deletions that splice a new tag together are also handled.
PassResult remove_extraction_artifacts(std::string_view text, const CleaningConfig& config = {});

// Pass 2: "1Introduction" -> "1 Introduction". Only a digit followed by an
// uppercase letter and then a lowercase letter is split.
PassResult correct_merged_words(std::string_view text);

struct RemovedSpan {
    std::size_t offset = 0;  // position in the text of the sweep that removed it
    std::string text;        // the gap plus the repeated copy
};

struct OcrDedupResult {
    std::string text;
    std::vector<RemovedSpan> removed;
};

// Pass 3: collapses a span of at least `ocr_min_span` bytes that is repeated
// after at most `ocr_max_gap` non-alphanumeric bytes. Runs to a fixpoint.
OcrDedupResult remove_ocr_duplication(std::string_view text, const CleaningConfig& config = {});

// Pass 4: drops low-information lines and collapses 3+ newlines to 2.
PassResult rule_based_filter(std::string_view text, const CleaningConfig& config = {});

PassResult anonymize_emails(std::string_view text);

// True when `text` contains a substring the email rule would replace.
bool contains_email(std::string_view text);

// True if the artifact pass would still delete something from `text`.
bool contains_residual_tag(std::string_view text, const CleaningConfig& config = {});

// Runs the passes in order 1 -> 4, then email anonymization.
CleanDocument clean_document(const RawDocument& doc, const CleaningConfig& config = {});

RawDocument raw_document_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RawDocument& doc);
CleanDocument clean_document_from_json(const nlohmann::json& j);
nlohmann::json to_json(const CleanDocument& doc);

}  // namespace ragkit::corpus
