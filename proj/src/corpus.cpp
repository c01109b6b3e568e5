#include "ragkit/corpus.hpp"

#include <algorithm>
#include <array>
#include <stdexcept>

#include "ragkit/text_util.hpp"

namespace ragkit::corpus {

using nlohmann::json;

std::string_view to_string(FormatHint hint) {
    switch (hint) {
        case FormatHint::html_extracted: return "html-extracted";
        case FormatHint::pdf_extracted: return "pdf-extracted";
        case FormatHint::plain: return "plain";
    }
    return "plain";
}

FormatHint format_hint_from_string(std::string_view name) {
    if (name == "html-extracted") return FormatHint::html_extracted;
    if (name == "pdf-extracted") return FormatHint::pdf_extracted;
    if (name == "plain") return FormatHint::plain;
    throw std::invalid_argument("unknown format_hint '" + std::string(name) + "'");
}

CleaningConfig CleaningConfig::from_json(const json& j) {
    CleaningConfig c;
    for (const auto& [key, value] : j.items()) {
        if (key == "tag_literals") c.tag_literals = value.get<std::vector<std::string>>();
        else if (key == "strip_allcaps_tags") c.strip_allcaps_tags = value.get<bool>();
        else if (key == "ocr_min_span") c.ocr_min_span = value.get<std::size_t>();
        else if (key == "ocr_max_gap") c.ocr_max_gap = value.get<std::size_t>();
        else if (key == "ocr_max_span") c.ocr_max_span = value.get<std::size_t>();
        else if (key == "low_info_symbol_ratio") c.low_info_symbol_ratio = value.get<double>();
        else if (key == "low_info_min_length") c.low_info_min_length = value.get<std::size_t>();
        else if (key == "anonymize_emails") c.anonymize_emails = value.get<bool>();
        else throw std::invalid_argument("unknown cleaning config key '" + key + "'");
    }
    if (c.ocr_min_span == 0 || c.ocr_max_span < c.ocr_min_span) {
        throw std::invalid_argument("cleaning config: need 0 < ocr_min_span <= ocr_max_span");
    }
    return c;
}

json CleaningConfig::to_json() const {
    return {{"tag_literals", tag_literals},
            {"strip_allcaps_tags", strip_allcaps_tags},
            {"ocr_min_span", ocr_min_span},
            {"ocr_max_gap", ocr_max_gap},
            {"ocr_max_span", ocr_max_span},
            {"low_info_symbol_ratio", low_info_symbol_ratio},
            {"low_info_min_length", low_info_min_length},
            {"anonymize_emails", anonymize_emails}};
}

// ============================================================================
// Pass 1: extraction artifacts
// ============================================================================

namespace {

// Length of the tag starting at `i`, or 0.
std::size_t tag_length_at(std::string_view text, std::size_t i, const CleaningConfig& config) {
    if (text[i] != '<') return 0;
    for (const auto& lit : config.tag_literals) {
        if (!lit.empty() && text.substr(i, lit.size()) == lit) return lit.size();
    }
    if (!config.strip_allcaps_tags) return 0;
    std::size_t j = i + 1;
    if (j >= text.size() || !is_upper(text[j])) return 0;
    while (j < text.size() && (is_upper(text[j]) || is_digit(text[j]) || text[j] == '_')) ++j;
    if (j < text.size() && text[j] == '>') return j + 1 - i;
    return 0;
}

std::size_t artifact_sweep(std::string_view text, std::string& out, const CleaningConfig& config) {
    out.clear();
    out.reserve(text.size());
    std::size_t edits = 0;
    std::size_t i = 0;
    while (i < text.size()) {
        const std::size_t len = tag_length_at(text, i, config);
        if (len > 0) {
            ++edits;
            i += len;
        } else {
            out.push_back(text[i++]);
        }
    }
    return edits;
}

}  // namespace

PassResult remove_extraction_artifacts(std::string_view text, const CleaningConfig& config) {
    PassResult result{std::string(text), 0};
    std::string next;
    while (true) {
        const std::size_t edits = artifact_sweep(result.text, next, config);
        if (edits == 0) break;
        result.edits += edits;
        result.text.swap(next);
    }
    return result;
}

bool contains_residual_tag(std::string_view text, const CleaningConfig& config) {
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (tag_length_at(text, i, config) > 0) return true;
    }
    return false;
}

// ============================================================================
// Pass 2: merged words
// ============================================================================

PassResult correct_merged_words(std::string_view text) {
    PassResult result;
    result.text.reserve(text.size() + 16);
    for (std::size_t i = 0; i < text.size(); ++i) {
        result.text.push_back(text[i]);
        if (is_digit(text[i]) && i + 2 < text.size() && is_upper(text[i + 1]) &&
            is_lower(text[i + 2])) {
            result.text.push_back(' ');
            ++result.edits;
        }
    }
    return result;
}

// ============================================================================
// Pass 3: OCR duplication
// ============================================================================

namespace {

bool is_gap_byte(char c) {
    const auto u = static_cast<unsigned char>(c);
    return u < 0x80 && !is_alnum(c);
}

bool is_continuation_byte(char c) {
    return (static_cast<unsigned char>(c) & 0xC0) == 0x80;
}

std::size_t ocr_sweep(std::string_view text, std::string& out, std::vector<RemovedSpan>& removed,
                      const CleaningConfig& cfg) {
    out.clear();
    out.reserve(text.size());
    const std::size_t n = text.size();
    std::size_t edits = 0;
    std::size_t i = 0;
    while (i < n) {
        bool collapsed = false;
        if (!is_continuation_byte(text[i])) {
            const std::size_t max_period = cfg.ocr_max_span + cfg.ocr_max_gap;
            for (std::size_t p = cfg.ocr_min_span; p <= max_period && i + p + cfg.ocr_min_span <= n; ++p) {
                if (text[i] != text[i + p]) continue;
                for (std::size_t g = 0; g <= cfg.ocr_max_gap && g < p; ++g) {
                    const std::size_t len = p - g;
                    if (len < cfg.ocr_min_span || len > cfg.ocr_max_span) continue;
                    if (i + p + len > n) continue;
                    bool gap_ok = true;
                    for (std::size_t k = i + len; k < i + p; ++k) {
                        if (!is_gap_byte(text[k])) {
                            gap_ok = false;
                            break;
                        }
                    }
                    if (!gap_ok) continue;
                    if (text.compare(i, len, text, i + p, len) != 0) continue;
                    out.append(text.substr(i, len));
                    removed.push_back({i + len, std::string(text.substr(i + len, p))});
                    i += p + len;
                    ++edits;
                    collapsed = true;
                    break;
                }
                if (collapsed) break;
            }
        }
        if (!collapsed) out.push_back(text[i++]);
    }
    return edits;
}

}  // namespace

OcrDedupResult remove_ocr_duplication(std::string_view text, const CleaningConfig& config) {
    OcrDedupResult result{std::string(text), {}};
    std::string next;
    while (ocr_sweep(result.text, next, result.removed, config) > 0) {
        result.text.swap(next);
    }
    return result;
}

// ============================================================================
// Pass 4: rule-based filtering
// ============================================================================

namespace {

bool is_low_information_line(std::string_view line, const CleaningConfig& cfg) {
    const std::string_view t = trim(line);
    if (!t.empty() && t.front() == '|') return false;  // markdown table rows
    std::size_t non_ws = 0;
    std::array<std::size_t, 128> counts{};
    for (char c : t) {
        if (is_space(c)) continue;
        ++non_ws;
        const auto u = static_cast<unsigned char>(c);
        if (u < 0x80 && !is_alnum(c)) ++counts[u];
    }
    if (non_ws < cfg.low_info_min_length) return false;
    std::size_t top = 0;
    for (std::size_t c : counts) top = std::max(top, c);
    return static_cast<double>(top) >= cfg.low_info_symbol_ratio * static_cast<double>(non_ws);
}

}  // namespace

PassResult rule_based_filter(std::string_view text, const CleaningConfig& config) {
    PassResult result;
    std::string kept;
    kept.reserve(text.size());
    std::size_t start = 0;
    while (start < text.size()) {
        std::size_t nl = text.find('\n', start);
        const bool has_newline = nl != std::string_view::npos;
        const std::size_t end = has_newline ? nl : text.size();
        const std::string_view line = text.substr(start, end - start);
        if (is_low_information_line(line, config)) {
            ++result.edits;
        } else {
            kept.append(line);
            if (has_newline) kept.push_back('\n');
        }
        start = has_newline ? nl + 1 : text.size();
    }

    result.text.reserve(kept.size());
    std::size_t i = 0;
    while (i < kept.size()) {
        if (kept[i] != '\n') {
            result.text.push_back(kept[i++]);
            continue;
        }
        std::size_t j = i;
        while (j < kept.size() && kept[j] == '\n') ++j;
        const std::size_t run = j - i;
        if (run >= 3) {
            result.text.append("\n\n");
            ++result.edits;
        } else {
            result.text.append(run, '\n');
        }
        i = j;
    }
    return result;
}

// ============================================================================
// Email anonymization
// ============================================================================

namespace {

bool is_local_char(char c) {
    return is_alnum(c) || c == '.' || c == '_' || c == '%' || c == '+' || c == '-';
}
bool is_domain_char(char c) { return is_alnum(c) || c == '.' || c == '-'; }

struct EmailMatch {
    std::size_t start;
    std::size_t end;
};

// Finds the leftmost-longest match of
//   [A-Za-z0-9._%+-]+ @ [A-Za-z0-9.-]+ \. [A-Za-z]+
// whose start is not before `floor`.
bool find_email(std::string_view text, std::size_t from, std::size_t floor, EmailMatch* match) {
    for (std::size_t at = text.find('@', from); at != std::string_view::npos;
         at = text.find('@', at + 1)) {
        std::size_t left = at;
        while (left > floor && is_local_char(text[left - 1])) --left;
        if (left == at) continue;
        std::size_t run_end = at + 1;
        while (run_end < text.size() && is_domain_char(text[run_end])) ++run_end;
        // Longest prefix of the domain run of the form X.L+ with X non-empty.
        for (std::size_t e = run_end; e > at + 3; --e) {
            if (!is_alpha(text[e - 1])) continue;
            std::size_t d = e - 1;
            while (d > at + 1 && is_alpha(text[d - 1])) --d;
            // text[d, e) is the trailing letter run; a dot must precede it.
            if (d >= at + 3 && text[d - 1] == '.') {
                *match = {left, e};
                return true;
            }
        }
    }
    return false;
}

}  // namespace

PassResult anonymize_emails(std::string_view text) {
    PassResult result;
    result.text.reserve(text.size());
    std::size_t cursor = 0;
    EmailMatch m{};
    while (find_email(text, cursor, cursor, &m)) {
        result.text.append(text.substr(cursor, m.start - cursor));
        result.text.append("[EMAIL]");
        ++result.edits;
        cursor = m.end;
    }
    result.text.append(text.substr(cursor));
    return result;
}

bool contains_email(std::string_view text) {
    EmailMatch m{};
    return find_email(text, 0, 0, &m);
}

// ============================================================================
// Pipeline
// ============================================================================

CleanDocument clean_document(const RawDocument& doc, const CleaningConfig& config) {
    CleanDocument out;
    out.id = doc.id;
    out.source = doc.source;
    out.metadata = doc.metadata;

    std::size_t artifact_edits = 0, merged_edits = 0, ocr_edits = 0, filter_edits = 0, email_edits = 0;
    std::string text = doc.text;
    // Later passes can recreate input for earlier ones (a spliced tag, two
    // emails that anonymize to the same placeholder), so repeat to a fixed
    // point. Every round that changes the text removes bytes or placeholders
    // a later round cannot recreate; the cap is a backstop.
    for (int round = 0; round < 64; ++round) {
        auto artifacts = remove_extraction_artifacts(text, config);
        auto merged = correct_merged_words(artifacts.text);
        auto ocr = remove_ocr_duplication(merged.text, config);
        auto filtered = rule_based_filter(ocr.text, config);
        artifact_edits += artifacts.edits;
        merged_edits += merged.edits;
        ocr_edits += ocr.removed.size();
        filter_edits += filtered.edits;
        std::string next = std::move(filtered.text);
        if (config.anonymize_emails) {
            auto anon = anonymize_emails(next);
            email_edits += anon.edits;
            next = std::move(anon.text);
        }
        if (next == text) break;
        text = std::move(next);
    }

    out.cleaning_log = {{"remove_extraction_artifacts", artifact_edits},
                        {"correct_merged_words", merged_edits},
                        {"remove_ocr_duplication", ocr_edits},
                        {"rule_based_filter", filter_edits}};
    if (config.anonymize_emails) out.cleaning_log.push_back({"anonymize_emails", email_edits});
    out.text = std::move(text);
    return out;
}

// ============================================================================
// JSON
// ============================================================================

namespace {

Metadata metadata_from_json(const json& j) {
    Metadata m;
    if (j.is_null()) return m;
    if (!j.is_object()) throw std::invalid_argument("metadata must be an object");
    for (const auto& [key, value] : j.items()) {
        if (value.is_null()) continue;
        m[key] = value.is_string() ? value.get<std::string>() : value.dump();
    }
    return m;
}

}  // namespace

RawDocument raw_document_from_json(const json& j) {
    RawDocument d;
    d.id = j.at("id").get<std::string>();
    d.text = j.at("text").get<std::string>();
    d.source = j.value("source", std::string{});
    if (j.contains("format_hint")) d.format_hint = format_hint_from_string(j["format_hint"].get<std::string>());
    if (j.contains("metadata")) d.metadata = metadata_from_json(j["metadata"]);
    if (d.id.empty()) throw std::invalid_argument("document id must be non-empty");
    if (!is_valid_utf8(d.text)) throw std::invalid_argument("document '" + d.id + "' text is not valid UTF-8");
    return d;
}

json to_json(const RawDocument& doc) {
    return {{"id", doc.id},
            {"text", doc.text},
            {"source", doc.source},
            {"format_hint", to_string(doc.format_hint)},
            {"metadata", doc.metadata}};
}

CleanDocument clean_document_from_json(const json& j) {
    CleanDocument d;
    d.id = j.at("id").get<std::string>();
    d.text = j.at("text").get<std::string>();
    d.source = j.value("source", std::string{});
    if (j.contains("metadata")) d.metadata = metadata_from_json(j["metadata"]);
    if (j.contains("cleaning_log")) {
        for (const auto& rec : j["cleaning_log"]) {
            d.cleaning_log.push_back({rec.at("pass").get<std::string>(), rec.at("edits").get<std::size_t>()});
        }
    }
    if (d.id.empty()) throw std::invalid_argument("document id must be non-empty");
    return d;
}

json to_json(const CleanDocument& doc) {
    json log = json::array();
    for (const auto& rec : doc.cleaning_log) log.push_back({{"pass", rec.pass}, {"edits", rec.edits}});
    return {{"id", doc.id},
            {"text", doc.text},
            {"source", doc.source},
            {"metadata", doc.metadata},
            {"cleaning_log", log}};
}

}  // namespace ragkit::corpus
