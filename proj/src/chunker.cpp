#include "ragkit/chunker.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <stdexcept>

namespace ragkit::chunking {

using nlohmann::json;

std::string_view to_string(SpanKind kind) {
    switch (kind) {
        case SpanKind::latex_inline: return "latex-inline";
        case SpanKind::latex_display: return "latex-display";
        case SpanKind::markdown_table: return "markdown-table";
    }
    return "latex-inline";
}

// ============================================================================
// Structure detection
// ============================================================================

namespace {

struct Line {
    std::size_t start;
    std::size_t end;  // excludes '\n'
    bool blank;
};

std::vector<Line> split_lines(std::string_view text) {
    std::vector<Line> lines;
    std::size_t pos = 0;
    while (true) {
        const std::size_t nl = text.find('\n', pos);
        const std::size_t end = nl == std::string_view::npos ? text.size() : nl;
        lines.push_back({pos, end, trim(text.substr(pos, end - pos)).empty()});
        if (nl == std::string_view::npos) break;
        pos = nl + 1;
    }
    return lines;
}

bool is_table_row(std::string_view line) {
    const auto t = trim(line);
    return !t.empty() && t.front() == '|';
}

bool is_delimiter_row(std::string_view line) {
    const auto t = trim(line);
    bool dash = false;
    for (char c : t) {
        if (c == '-') dash = true;
        else if (c != '|' && c != ':' && c != ' ' && c != '\t') return false;
    }
    return dash;
}

const std::set<std::string, std::less<>> kDisplayEnvironments = {
    "equation", "equation*", "align",  "align*",   "gather",      "gather*", "multline",
    "multline*", "eqnarray", "eqnarray*", "displaymath", "math",   "array",   "tabular",
    "tabular*", "table",     "table*",  "split",    "alignat",     "alignat*", "flalign", "flalign*"};

class StructureScanner {
public:
    explicit StructureScanner(std::string_view text) : text_(text), lines_(split_lines(text)) {}

    DocumentStructure run() {
        detect_tables();
        detect_math();
        merge_spans();
        detect_paragraphs();
        detect_sections();
        detect_sentences();
        return std::move(out_);
    }

private:
    std::size_t line_of(std::size_t pos) const {
        auto it = std::upper_bound(lines_.begin(), lines_.end(), pos,
                                   [](std::size_t p, const Line& l) { return p < l.start; });
        return static_cast<std::size_t>(std::distance(lines_.begin(), it)) - 1;
    }

    // End of the last non-blank line of the paragraph containing `pos`.
    std::size_t paragraph_end(std::size_t pos) const {
        std::size_t li = line_of(pos);
        std::size_t end = lines_[li].end;
        for (std::size_t k = li + 1; k < lines_.size() && !lines_[k].blank; ++k) end = lines_[k].end;
        return trim_span(text_, {pos, end}).end;
    }

    // First span that ends after `pos`, among spans_ sorted by start.
    const ProtectedSpan* span_strictly_containing(std::size_t pos) const {
        auto it = std::upper_bound(out_.protected_spans.begin(), out_.protected_spans.end(), pos,
                                   [](std::size_t p, const ProtectedSpan& s) { return p < s.span.start; });
        if (it == out_.protected_spans.begin()) return nullptr;
        --it;
        return (it->span.start < pos && pos < it->span.end) ? &*it : nullptr;
    }

    bool inside_span(std::size_t pos) const {
        auto it = std::upper_bound(out_.protected_spans.begin(), out_.protected_spans.end(), pos,
                                   [](std::size_t p, const ProtectedSpan& s) { return p < s.span.start; });
        if (it == out_.protected_spans.begin()) return false;
        --it;
        return it->span.start <= pos && pos < it->span.end;
    }

    void detect_tables() {
        std::size_t i = 0;
        while (i < lines_.size()) {
            if (!is_table_row(text_.substr(lines_[i].start, lines_[i].end - lines_[i].start))) {
                ++i;
                continue;
            }
            std::size_t j = i;
            while (j < lines_.size() && is_table_row(text_.substr(lines_[j].start, lines_[j].end - lines_[j].start))) ++j;
            if (j - i >= 2 && is_delimiter_row(text_.substr(lines_[i + 1].start, lines_[i + 1].end - lines_[i + 1].start))) {
                tables_.push_back({trim_span(text_, {lines_[i].start, lines_[j - 1].end}), SpanKind::markdown_table});
            }
            i = j;
        }
    }

    // Index of the first unescaped occurrence of `closer` at or after `from`
    // and before `limit`, or npos.
    std::size_t find_closer(std::size_t from, std::size_t limit, std::string_view closer) const {
        std::size_t i = from;
        while (i + closer.size() <= limit) {
            if (text_.compare(i, closer.size(), closer) == 0) return i;
            if (text_[i] == '\\' && closer.front() != '\\') {
                i += 2;
                continue;
            }
            ++i;
        }
        return std::string_view::npos;
    }

    void add_math(std::size_t start, std::size_t close_pos, std::size_t closer_len, SpanKind kind,
                  std::string_view what) {
        if (close_pos == std::string_view::npos) {
            const std::size_t end = std::max(paragraph_end(start), start + 1);
            char buf[160];
            std::snprintf(buf, sizeof buf, "unterminated %.*s at byte %zu; protected to end of paragraph",
                          static_cast<int>(what.size()), what.data(), start);
            out_.warnings.emplace_back(buf);
            math_.push_back({{start, end}, kind});
        } else {
            math_.push_back({{start, close_pos + closer_len}, kind});
        }
    }

    void detect_math() {
        const std::size_t n = text_.size();
        std::size_t table_idx = 0;
        std::size_t i = 0;
        while (i < n) {
            while (table_idx < tables_.size() && tables_[table_idx].span.end <= i) ++table_idx;
            if (table_idx < tables_.size() && tables_[table_idx].span.start <= i) {
                i = tables_[table_idx].span.end;
                continue;
            }
            const char c = text_[i];
            if (c == '\\' && i + 1 < n) {
                const char d = text_[i + 1];
                if (d == '[') {
                    const std::size_t close = find_closer(i + 2, n, "\\]");
                    add_math(i, close, 2, SpanKind::latex_display, "\\[");
                    i = math_.back().span.end;
                    continue;
                }
                if (d == '(') {
                    const std::size_t close = find_closer(i + 2, paragraph_end(i), "\\)");
                    add_math(i, close, 2, SpanKind::latex_inline, "\\(");
                    i = math_.back().span.end;
                    continue;
                }
                if (text_.compare(i, 7, "\\begin{") == 0) {
                    const std::size_t name_end = text_.find('}', i + 7);
                    if (name_end != std::string_view::npos) {
                        const std::string_view env = text_.substr(i + 7, name_end - (i + 7));
                        if (kDisplayEnvironments.count(env)) {
                            const std::string closer = "\\end{" + std::string(env) + "}";
                            const std::size_t close = text_.find(closer, name_end + 1);
                            add_math(i, close, closer.size(), SpanKind::latex_display, "\\begin{" + std::string(env) + "}");
                            i = math_.back().span.end;
                            continue;
                        }
                    }
                }
                i += 2;  // escaped character, including "\$"
                continue;
            }
            if (c == '$') {
                if (i + 1 < n && text_[i + 1] == '$') {
                    const std::size_t close = find_closer(i + 2, n, "$$");
                    add_math(i, close, 2, SpanKind::latex_display, "$$");
                    i = math_.back().span.end;
                    continue;
                }
                if (i + 1 >= n || is_space(text_[i + 1])) {
                    ++i;  // a lone dollar sign
                    continue;
                }
                const std::size_t close = find_closer(i + 1, paragraph_end(i), "$");
                add_math(i, close, 1, SpanKind::latex_inline, "$");
                i = math_.back().span.end;
                continue;
            }
            ++i;
        }
    }

    void merge_spans() {
        std::vector<ProtectedSpan> all = tables_;
        all.insert(all.end(), math_.begin(), math_.end());
        std::sort(all.begin(), all.end(),
                  [](const ProtectedSpan& a, const ProtectedSpan& b) { return a.span.start < b.span.start; });
        for (const auto& s : all) {
            if (!out_.protected_spans.empty() && s.span.start < out_.protected_spans.back().span.end) {
                auto& last = out_.protected_spans.back();
                last.span.end = std::max(last.span.end, s.span.end);
                continue;
            }
            out_.protected_spans.push_back(s);
        }
    }

    void detect_paragraphs() {
        std::size_t start = std::string_view::npos;
        std::size_t end = 0;
        for (const auto& line : lines_) {
            const bool splits = line.blank && !inside_span(line.start);
            if (splits) {
                if (start != std::string_view::npos) {
                    out_.paragraphs.push_back(trim_span(text_, {start, end}));
                    start = std::string_view::npos;
                }
                continue;
            }
            if (line.blank) {
                end = line.end;
                continue;
            }
            if (start == std::string_view::npos) start = line.start;
            end = line.end;
        }
        if (start != std::string_view::npos) out_.paragraphs.push_back(trim_span(text_, {start, end}));
        std::erase_if(out_.paragraphs, [](const ByteSpan& p) { return p.empty(); });
    }

    struct Heading {
        std::size_t line_start;
        int level;
        std::string title;
    };

    static bool parse_markdown_heading(std::string_view line, int* level, std::string* title) {
        std::size_t i = 0;
        while (i < line.size() && i < 3 && line[i] == ' ') ++i;
        std::size_t hashes = 0;
        while (i + hashes < line.size() && line[i + hashes] == '#') ++hashes;
        if (hashes == 0 || hashes > 6) return false;
        const std::size_t after = i + hashes;
        if (after >= line.size() || (line[after] != ' ' && line[after] != '\t')) return false;
        std::string_view t = trim(line.substr(after));
        while (!t.empty() && t.back() == '#') t.remove_suffix(1);
        t = trim(t);
        if (t.empty()) return false;
        *level = static_cast<int>(hashes);
        *title = std::string(t);
        return true;
    }

    static bool parse_numbered_heading(std::string_view line, int* level, std::string* title) {
        const std::string_view t = trim(line);
        std::size_t i = 0;
        int components = 0;
        while (true) {
            const std::size_t digits_start = i;
            while (i < t.size() && is_digit(t[i])) ++i;
            if (i == digits_start || i - digits_start > 3) return false;
            ++components;
            if (i < t.size() && t[i] == '.' && i + 1 < t.size() && is_digit(t[i + 1])) {
                ++i;
                continue;
            }
            break;
        }
        if (i < t.size() && t[i] == '.') ++i;
        if (i >= t.size() || (t[i] != ' ' && t[i] != '\t')) return false;
        const std::string_view rest = trim(t.substr(i));
        if (rest.empty() || !is_upper(rest.front())) return false;
        if (t.size() > 120 || count_words(rest) > 12) return false;
        const char last = t.back();
        if (last == '.' || last == ',' || last == ';' || last == ':' || last == '?' || last == '!') return false;
        *level = components;
        *title = std::string(t);
        return true;
    }

    void detect_sections() {
        std::vector<Heading> headings;
        for (const auto& line : lines_) {
            if (line.blank || inside_span(line.start)) continue;
            const std::string_view content = text_.substr(line.start, line.end - line.start);
            int level = 0;
            std::string title;
            if (parse_markdown_heading(content, &level, &title) || parse_numbered_heading(content, &level, &title)) {
                headings.push_back({line.start, level, std::move(title)});
            }
        }
        const std::size_t n = text_.size();
        const std::size_t first = headings.empty() ? n : headings.front().line_start;
        if (!trim(text_.substr(0, first)).empty()) out_.sections.push_back({{}, {0, first}});

        std::vector<std::pair<int, std::string>> stack;
        for (std::size_t h = 0; h < headings.size(); ++h) {
            while (!stack.empty() && stack.back().first >= headings[h].level) stack.pop_back();
            stack.emplace_back(headings[h].level, headings[h].title);
            Section s;
            for (const auto& [lvl, title] : stack) s.path.push_back(title);
            s.span = {headings[h].line_start, h + 1 < headings.size() ? headings[h + 1].line_start : n};
            out_.sections.push_back(std::move(s));
        }
    }

    void detect_sentences() {
        for (const auto& p : out_.paragraphs) {
            std::size_t cur = p.start;
            std::size_t j = p.start;
            while (j < p.end) {
                const char c = text_[j];
                if ((c == '.' || c == '!' || c == '?') && !inside_span(j)) {
                    std::size_t k = j + 1;
                    while (k < p.end && (text_[k] == '"' || text_[k] == '\'' || text_[k] == ')' || text_[k] == ']')) ++k;
                    if (k < p.end && is_space(text_[k]) && !span_strictly_containing(k)) {
                        out_.sentences.push_back(trim_span(text_, {cur, k}));
                        cur = k;
                        j = k;
                        continue;
                    }
                }
                ++j;
            }
            const ByteSpan last = trim_span(text_, {cur, p.end});
            if (!last.empty()) out_.sentences.push_back(last);
        }
    }

    std::string_view text_;
    std::vector<Line> lines_;
    std::vector<ProtectedSpan> tables_;
    std::vector<ProtectedSpan> math_;
    DocumentStructure out_;
};

}  // namespace

DocumentStructure detect_structure(std::string_view text) {
    if (text.empty()) return {};
    return StructureScanner(text).run();
}

// ============================================================================
// Chunking
// ============================================================================

void ChunkConfig::validate() const {
    if (target_words == 0 || hard_max_words < target_words) {
        throw std::invalid_argument("chunk config: need 0 < target_words <= hard_max_words");
    }
}

ChunkConfig ChunkConfig::from_json(const json& j) {
    ChunkConfig c;
    bool hard_max_given = false;
    for (const auto& [key, value] : j.items()) {
        if (key == "target_words") c.target_words = value.get<std::size_t>();
        else if (key == "hard_max_words") {
            c.hard_max_words = value.get<std::size_t>();
            hard_max_given = true;
        } else if (key == "sentence_fallback") c.sentence_fallback = value.get<bool>();
        else throw std::invalid_argument("unknown chunk config key '" + key + "'");
    }
    if (!hard_max_given) c.hard_max_words = c.target_words + c.target_words / 4;
    c.validate();
    return c;
}

json ChunkConfig::to_json() const {
    return {{"target_words", target_words}, {"hard_max_words", hard_max_words}, {"sentence_fallback", sentence_fallback}};
}

std::string make_chunk_id(std::string_view doc_id, std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "#%04zu", index);
    return std::string(doc_id) + buf;
}

namespace {

struct Piece {
    ByteSpan span;
    std::size_t words;
};

class Chunker {
public:
    Chunker(const corpus::CleanDocument& doc, const ChunkConfig& config)
        : doc_(doc), text_(doc.text), config_(config), structure_(detect_structure(text_)),
          words_(word_spans(text_)) {
        build_atoms();
    }

    ChunkedDocument run() {
        ChunkedDocument out;
        out.warnings = structure_.warnings;
        for (const auto& section : structure_.sections) {
            const ByteSpan s = trim_span(text_, section.span);
            const std::size_t wc = words_in(s);
            if (wc == 0) continue;
            std::vector<Piece> pieces;
            if (wc <= config_.target_words) {
                pieces.push_back({s, wc});
            } else {
                split_section(s, pieces);
            }
            pack(pieces, section, out);
        }
        return out;
    }

private:
    std::size_t words_in(ByteSpan r) const {
        auto lo = std::lower_bound(words_.begin(), words_.end(), r.start,
                                   [](const ByteSpan& w, std::size_t p) { return w.start < p; });
        auto hi = std::lower_bound(words_.begin(), words_.end(), r.end,
                                   [](const ByteSpan& w, std::size_t p) { return w.start < p; });
        return static_cast<std::size_t>(hi - lo);
    }

    // Atoms are runs of words with no legal cut between them: a cut is
    // illegal when a protected span covers it.
    void build_atoms() {
        const auto& spans = structure_.protected_spans;
        std::size_t si = 0;
        for (std::size_t w = 0; w < words_.size(); ++w) {
            if (atoms_.empty() || cut_allowed_before_[w - 1]) {
                atoms_.push_back({words_[w], 1});
            } else {
                atoms_.back().span.end = words_[w].end;
                ++atoms_.back().words;
            }
            if (w + 1 < words_.size()) {
                const std::size_t gap_start = words_[w].end;
                const std::size_t next_start = words_[w + 1].start;
                while (si < spans.size() && spans[si].span.end <= gap_start) ++si;
                const bool blocked = si < spans.size() && spans[si].span.start < next_start;
                cut_allowed_before_.push_back(!blocked);
            }
        }
    }

    void atoms_in(ByteSpan r, std::vector<Piece>& pieces) const {
        auto it = std::lower_bound(atoms_.begin(), atoms_.end(), r.start,
                                   [](const Piece& a, std::size_t p) { return a.span.start < p; });
        for (; it != atoms_.end() && it->span.start < r.end; ++it) pieces.push_back(*it);
    }

    void split_paragraph(ByteSpan p, std::vector<Piece>& pieces) const {
        if (!config_.sentence_fallback) {
            atoms_in(p, pieces);
            return;
        }
        for (const auto& sentence : structure_.sentences) {
            if (sentence.end <= p.start || sentence.start >= p.end) continue;
            const ByteSpan clipped = trim_span(text_, {std::max(sentence.start, p.start), std::min(sentence.end, p.end)});
            const std::size_t wc = words_in(clipped);
            if (wc == 0) continue;
            if (wc <= config_.target_words) pieces.push_back({clipped, wc});
            else atoms_in(clipped, pieces);
        }
    }

    void split_section(ByteSpan s, std::vector<Piece>& pieces) const {
        for (const auto& para : structure_.paragraphs) {
            if (para.end <= s.start || para.start >= s.end) continue;
            const ByteSpan clipped = trim_span(text_, {std::max(para.start, s.start), std::min(para.end, s.end)});
            const std::size_t wc = words_in(clipped);
            if (wc == 0) continue;
            if (wc <= config_.target_words) pieces.push_back({clipped, wc});
            else split_paragraph(clipped, pieces);
        }
    }

    void emit(ByteSpan span, std::size_t wc, const Section& section, ChunkedDocument& out) const {
        Chunk c;
        c.chunk_id = make_chunk_id(doc_.id, out.chunks.size());
        c.doc_id = doc_.id;
        c.text = std::string(text_.substr(span.start, span.size()));
        c.word_count = wc;
        c.section_path = section.path;
        c.metadata = doc_.metadata;
        c.span = span;
        if (wc > config_.hard_max_words) {
            c.oversize = true;
            out.warnings.push_back("chunk " + c.chunk_id + " holds a protected span of " + std::to_string(wc) +
                                   " words, above hard_max_words");
        }
        out.chunks.push_back(std::move(c));
    }

    void pack(const std::vector<Piece>& pieces, const Section& section, ChunkedDocument& out) const {
        bool open = false;
        ByteSpan cur{};
        std::size_t wc = 0;
        for (const auto& piece : pieces) {
            if (open && wc + piece.words > config_.target_words) {
                emit(cur, wc, section, out);
                open = false;
            }
            if (!open) {
                cur = piece.span;
                wc = 0;
                open = true;
            }
            cur.end = piece.span.end;
            wc += piece.words;
        }
        if (open) emit(cur, wc, section, out);
    }

    const corpus::CleanDocument& doc_;
    std::string_view text_;
    ChunkConfig config_;
    DocumentStructure structure_;
    std::vector<ByteSpan> words_;
    std::vector<Piece> atoms_;
    std::vector<bool> cut_allowed_before_;  // [w] = may cut between word w and w+1
};

}  // namespace

ChunkedDocument chunk_document(const corpus::CleanDocument& doc, const ChunkConfig& config) {
    config.validate();
    if (trim(doc.text).empty()) return {};
    return Chunker(doc, config).run();
}

// ============================================================================
// Uninformative-chunk filter
// ============================================================================

FilterConfig FilterConfig::from_json(const json& j) {
    FilterConfig c;
    for (const auto& [key, value] : j.items()) {
        if (key == "min_words") c.min_words = value.get<std::size_t>();
        else if (key == "min_alpha_ratio") c.min_alpha_ratio = value.get<double>();
        else if (key == "min_distinct_ratio") c.min_distinct_ratio = value.get<double>();
        else throw std::invalid_argument("unknown filter config key '" + key + "'");
    }
    return c;
}

json FilterConfig::to_json() const {
    return {{"min_words", min_words}, {"min_alpha_ratio", min_alpha_ratio}, {"min_distinct_ratio", min_distinct_ratio}};
}

std::string uninformative_reason(std::string_view text, const FilterConfig& config) {
    const auto words = word_spans(text);
    if (words.size() < config.min_words) return "too-short";

    std::size_t chars = 0;
    std::size_t alpha = 0;
    for (char c : text) {
        const auto u = static_cast<unsigned char>(c);
        if (is_space(c) || (u & 0xC0) == 0x80) continue;  // whitespace, UTF-8 continuation
        ++chars;
        if (is_alpha(c) || u >= 0xC0) ++alpha;
    }
    if (chars == 0 || static_cast<double>(alpha) < config.min_alpha_ratio * static_cast<double>(chars)) {
        return "low-alpha";
    }

    std::set<std::string> distinct;
    for (const auto& w : words) distinct.insert(to_lower_ascii(text.substr(w.start, w.size())));
    if (static_cast<double>(distinct.size()) < config.min_distinct_ratio * static_cast<double>(words.size())) {
        return "low-diversity";
    }
    return {};
}

FilterResult filter_uninformative(std::vector<Chunk> chunks, const FilterConfig& config) {
    FilterResult result;
    for (auto& c : chunks) {
        std::string reason = uninformative_reason(c.text, config);
        if (reason.empty()) result.kept.push_back(std::move(c));
        else result.dropped.push_back({std::move(c), std::move(reason)});
    }
    return result;
}

// ============================================================================
// JSON
// ============================================================================

json to_json(const Chunk& chunk) {
    json j{{"chunk_id", chunk.chunk_id},
           {"doc_id", chunk.doc_id},
           {"text", chunk.text},
           {"word_count", chunk.word_count},
           {"section_path", chunk.section_path},
           {"metadata", chunk.metadata},
           {"start", chunk.span.start},
           {"end", chunk.span.end}};
    if (chunk.oversize) j["oversize"] = true;
    return j;
}

Chunk chunk_from_json(const json& j) {
    Chunk c;
    c.chunk_id = j.at("chunk_id").get<std::string>();
    c.doc_id = j.value("doc_id", std::string{});
    c.text = j.at("text").get<std::string>();
    c.word_count = j.contains("word_count") ? j["word_count"].get<std::size_t>() : count_words(c.text);
    if (j.contains("section_path")) c.section_path = j["section_path"].get<std::vector<std::string>>();
    if (j.contains("metadata")) {
        for (const auto& [k, v] : j["metadata"].items()) c.metadata[k] = v.is_string() ? v.get<std::string>() : v.dump();
    }
    c.span = {j.value("start", std::size_t{0}), j.value("end", std::size_t{0})};
    c.oversize = j.value("oversize", false);
    return c;
}

}  // namespace ragkit::chunking
