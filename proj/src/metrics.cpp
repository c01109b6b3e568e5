#include "ragkit/metrics.hpp"

#include <algorithm>
#include <numeric>

namespace ragkit::eval {

// ============================================================================
// Token space
// ============================================================================

namespace {

constexpr int kDocShift = 40;  // positions within a document stay below 2^40

}  // namespace

TokenSpace::TokenSpace(std::map<std::string, std::string> docs) {
    for (const auto& [id, text] : docs) words_[id] = word_spans(text);
    for (const auto& [id, spans] : words_) {
        const auto n = static_cast<std::uint64_t>(doc_numbers_.size());
        doc_numbers_[id] = n;
    }
}

std::uint64_t TokenSpace::doc_number(const std::string& doc_id) const {
    std::lock_guard lock(*mutex_);
    auto it = doc_numbers_.find(doc_id);
    if (it != doc_numbers_.end()) return it->second;
    const auto n = static_cast<std::uint64_t>(doc_numbers_.size());
    doc_numbers_.emplace(doc_id, n);
    return n;
}

std::vector<TokenPos> TokenSpace::positions(const DocRange& range) const {
    if (range.span.end < range.span.start) {
        throw MetricError("invalid range [" + std::to_string(range.span.start) + ", " +
                          std::to_string(range.span.end) + ") in " + range.doc_id);
    }
    const std::uint64_t base = doc_number(range.doc_id) << kDocShift;
    std::vector<TokenPos> out;
    auto it = words_.find(range.doc_id);
    if (it == words_.end()) {
        out.reserve(range.span.size());
        for (std::size_t b = range.span.start; b < range.span.end; ++b) out.push_back(base | b);
        return out;
    }
    const auto& words = it->second;
    // First word whose end is past the range start.
    auto w = std::upper_bound(words.begin(), words.end(), range.span.start,
                              [](std::size_t pos, const ByteSpan& s) { return pos < s.end; });
    for (; w != words.end() && w->start < range.span.end; ++w) {
        if (w->intersects(range.span)) out.push_back(base | static_cast<std::uint64_t>(w - words.begin()));
    }
    return out;
}

// ============================================================================
// Token metrics
// ============================================================================

TokenCounts token_counts(const std::vector<TokenPos>& retrieved, const std::vector<TokenPos>& gold) {
    std::vector<TokenPos> g(gold);
    std::sort(g.begin(), g.end());
    g.erase(std::unique(g.begin(), g.end()), g.end());
    if (g.empty()) throw MetricError("empty gold set");
    std::vector<TokenPos> r(retrieved);
    std::sort(r.begin(), r.end());
    r.erase(std::unique(r.begin(), r.end()), r.end());
    std::vector<TokenPos> both;
    std::set_intersection(r.begin(), r.end(), g.begin(), g.end(), std::back_inserter(both));
    TokenCounts c;
    c.intersection = both.size();
    c.retrieved = retrieved.size();
    c.gold = g.size();
    c.gold_missed = g.size() - both.size();
    return c;
}

TokenMetrics token_metrics(const TokenCounts& c) {
    TokenMetrics m;
    const auto i = static_cast<double>(c.intersection);
    m.precision = c.retrieved ? i / static_cast<double>(c.retrieved) : 0.0;
    m.recall = c.gold ? i / static_cast<double>(c.gold) : 0.0;
    const std::size_t uni = c.retrieved + c.gold_missed;
    m.iou = uni ? i / static_cast<double>(uni) : 0.0;
    return m;
}

TokenMetrics token_metrics(const std::vector<TokenPos>& retrieved, const std::vector<TokenPos>& gold) {
    return token_metrics(token_counts(retrieved, gold));
}

namespace {

std::vector<TokenPos> gold_positions(const std::vector<DocRange>& gold, const TokenSpace& space) {
    std::vector<TokenPos> out;
    for (const auto& g : gold) {
        const auto p = space.positions(g);
        out.insert(out.end(), p.begin(), p.end());
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

bool overlaps_sorted(const std::vector<TokenPos>& positions, const std::vector<TokenPos>& sorted_gold) {
    return std::any_of(positions.begin(), positions.end(),
                       [&](TokenPos p) { return std::binary_search(sorted_gold.begin(), sorted_gold.end(), p); });
}

}  // namespace

SampleTokenResult sample_token_metrics(const RetrievalEvalSample& sample, const TokenSpace& space, std::size_t at) {
    SampleTokenResult out;
    out.query_id = sample.query_id;
    const auto gold = gold_positions(sample.gold, space);
    if (gold.empty()) {
        out.excluded_reason = "empty gold set; recall undefined";
        return out;
    }
    std::vector<TokenPos> retrieved;
    for (std::size_t i = 0; i < sample.retrieved.size() && i < at; ++i) {
        const auto p = space.positions(sample.retrieved[i]);
        retrieved.insert(retrieved.end(), p.begin(), p.end());
    }
    out.counts = token_counts(retrieved, gold);
    out.metrics = token_metrics(*out.counts);
    return out;
}

AggregateTokenMetrics aggregate_token_metrics(const std::vector<SampleTokenResult>& results) {
    AggregateTokenMetrics agg;
    TokenCounts total;
    for (const auto& r : results) {
        if (!r.metrics) {
            ++agg.excluded;
            continue;
        }
        ++agg.evaluated;
        agg.macro.iou += r.metrics->iou;
        agg.macro.precision += r.metrics->precision;
        agg.macro.recall += r.metrics->recall;
        total.intersection += r.counts->intersection;
        total.retrieved += r.counts->retrieved;
        total.gold += r.counts->gold;
        total.gold_missed += r.counts->gold_missed;
    }
    if (agg.evaluated == 0) throw MetricError("no evaluable samples");
    const auto n = static_cast<double>(agg.evaluated);
    agg.macro.iou /= n;
    agg.macro.precision /= n;
    agg.macro.recall /= n;
    agg.micro = token_metrics(total);
    return agg;
}

// ============================================================================
// Chunk-level metrics
// ============================================================================

bool is_relevant(const DocRange& chunk, const std::vector<DocRange>& gold, const TokenSpace& space) {
    return overlaps_sorted(space.positions(chunk), gold_positions(gold, space));
}

DocPassageRecall doc_passage_recall(const std::vector<RetrievalEvalSample>& samples, const TokenSpace& space,
                                    std::size_t at) {
    if (samples.empty()) throw MetricError("doc/passage recall over an empty sample set");
    DocPassageRecall out;
    std::size_t n = 0;
    for (const auto& s : samples) {
        const auto gold = gold_positions(s.gold, space);
        if (gold.empty()) continue;
        ++n;
        std::set<std::string> gold_docs;
        for (const auto& g : s.gold) {
            if (!space.positions(g).empty()) gold_docs.insert(g.doc_id);
        }
        std::set<std::string> hit_docs;
        std::size_t relevant = 0;
        const std::size_t limit = std::min(at, s.retrieved.size());
        for (std::size_t i = 0; i < limit; ++i) {
            if (overlaps_sorted(space.positions(s.retrieved[i]), gold)) {
                ++relevant;
                hit_docs.insert(s.retrieved[i].doc_id);
            }
        }
        std::size_t docs_found = 0;
        for (const auto& d : gold_docs) docs_found += hit_docs.count(d);
        out.doc_recall += static_cast<double>(docs_found) / static_cast<double>(gold_docs.size());
        out.passage_recall += limit ? static_cast<double>(relevant) / static_cast<double>(limit) : 0.0;
    }
    if (n == 0) throw MetricError("doc/passage recall: every sample has an empty gold set");
    out.doc_recall /= static_cast<double>(n);
    out.passage_recall /= static_cast<double>(n);
    return out;
}

std::optional<std::size_t> first_relevant_rank(const RetrievalEvalSample& sample, const TokenSpace& space,
                                               std::size_t n) {
    const auto gold = gold_positions(sample.gold, space);
    for (std::size_t i = 0; i < sample.retrieved.size() && i < n; ++i) {
        if (overlaps_sorted(space.positions(sample.retrieved[i]), gold)) return i + 1;
    }
    return std::nullopt;
}

double ref_retrieved_ratio_at(const std::vector<std::optional<std::size_t>>& first_ranks, std::size_t n) {
    if (first_ranks.empty()) throw MetricError("RRR over an empty sample set");
    std::size_t hits = 0;
    for (const auto& r : first_ranks) hits += r && *r >= 1 && *r <= n;
    return static_cast<double>(hits) / static_cast<double>(first_ranks.size());
}

double mrr_at(const std::vector<std::optional<std::size_t>>& first_ranks, std::size_t n) {
    if (first_ranks.empty()) throw MetricError("MRR over an empty sample set");
    double sum = 0.0;
    for (const auto& r : first_ranks) {
        if (r && *r >= 1 && *r <= n) sum += 1.0 / static_cast<double>(*r);
    }
    return sum / static_cast<double>(first_ranks.size());
}

double ref_retrieved_ratio_at(const std::vector<RetrievalEvalSample>& samples, const TokenSpace& space,
                              std::size_t n) {
    std::vector<std::optional<std::size_t>> ranks;
    for (const auto& s : samples) ranks.push_back(first_relevant_rank(s, space, n));
    return ref_retrieved_ratio_at(ranks, n);
}

double mrr_at(const std::vector<RetrievalEvalSample>& samples, const TokenSpace& space, std::size_t n) {
    std::vector<std::optional<std::size_t>> ranks;
    for (const auto& s : samples) ranks.push_back(first_relevant_rank(s, space, n));
    return mrr_at(ranks, n);
}

// ============================================================================
// NLS
// ============================================================================

std::size_t levenshtein(std::u32string_view a, std::u32string_view b) {
    if (a.size() < b.size()) std::swap(a, b);
    std::vector<std::size_t> row(b.size() + 1);
    std::iota(row.begin(), row.end(), std::size_t{0});
    for (std::size_t i = 1; i <= a.size(); ++i) {
        std::size_t diag = row[0];
        row[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const std::size_t up = row[j];
            row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
            diag = up;
        }
    }
    return row[b.size()];
}

double nls(std::string_view pred, std::string_view gold) {
    const auto a = decode_utf8(pred);
    const auto b = decode_utf8(gold);
    const std::size_t longest = std::max(a.size(), b.size());
    if (longest == 0) return 1.0;
    return 1.0 - static_cast<double>(levenshtein(a, b)) / static_cast<double>(longest);
}

// ============================================================================
// Judges, win rate, MCQA, F1
// ============================================================================

double normalize_judge_score(int score) {
    if (score < 0 || score > 5) throw MetricError("judge score out of range: " + std::to_string(score));
    return 20.0 * score;
}

JudgePanelResult aggregate_judge_scores(const std::vector<std::optional<int>>& scores,
                                        const std::vector<std::string>& judge_names) {
    if (scores.empty()) throw MetricError("judge panel is empty");
    JudgePanelResult out;
    double sum = 0.0;
    std::size_t used = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (!scores[i]) {
            out.per_judge.push_back(std::nullopt);
            const std::string name = i < judge_names.size() ? judge_names[i] : "judge " + std::to_string(i);
            out.flags.push_back(name + ": unparsable score excluded");
            continue;
        }
        const double v = normalize_judge_score(*scores[i]);
        out.per_judge.push_back(v);
        sum += v;
        ++used;
    }
    if (used == 0) throw MetricError("no judge produced a usable score");
    out.mean = sum / static_cast<double>(used);
    return out;
}

double win_rate(const std::vector<EvaluatorTally>& tally) {
    if (tally.empty()) throw MetricError("win rate needs at least one evaluator");
    double sum = 0.0;
    for (std::size_t i = 0; i < tally.size(); ++i) {
        const auto& t = tally[i];
        const std::size_t denom = t.wins + t.ties + t.losses;
        if (denom == 0) throw MetricError("evaluator " + std::to_string(i) + " has no comparisons");
        sum += (static_cast<double>(t.wins) + 0.5 * static_cast<double>(t.ties)) / static_cast<double>(denom);
    }
    return sum / static_cast<double>(tally.size());
}

OptionSet parse_options(std::string_view text) {
    OptionSet out;
    for (char c : text) {
        if (is_alpha(c)) out.insert(std::string(1, static_cast<char>(c & ~0x20)));
        else if (c != ',' && c != ';' && c != '/' && !is_space(c)) {
            throw MetricError("unexpected character in option list: " + std::string(text));
        }
    }
    return out;
}

double option_iou(const OptionSet& pred, const OptionSet& gold) {
    if (pred.empty() && gold.empty()) return 1.0;
    std::size_t inter = 0;
    for (const auto& p : pred) inter += gold.count(p);
    return static_cast<double>(inter) / static_cast<double>(pred.size() + gold.size() - inter);
}

McqaScore mcqa_score(const std::vector<OptionSet>& predictions, const std::vector<OptionSet>& gold) {
    if (predictions.size() != gold.size()) throw MetricError("MCQA prediction and gold counts differ");
    if (gold.empty()) throw MetricError("MCQA over an empty sample set");
    McqaScore s;
    for (std::size_t i = 0; i < gold.size(); ++i) {
        s.accuracy += predictions[i] == gold[i] ? 1.0 : 0.0;
        s.iou += option_iou(predictions[i], gold[i]);
    }
    s.accuracy /= static_cast<double>(gold.size());
    s.iou /= static_cast<double>(gold.size());
    return s;
}

BinaryF1 hallucination_f1(const std::vector<bool>& predicted, const std::vector<bool>& gold) {
    if (predicted.size() != gold.size()) throw MetricError("F1 prediction and gold counts differ");
    BinaryF1 r;
    for (std::size_t i = 0; i < gold.size(); ++i) {
        if (predicted[i] && gold[i]) ++r.tp;
        else if (predicted[i]) ++r.fp;
        else if (gold[i]) ++r.fn;
        else ++r.tn;
    }
    const auto tp = static_cast<double>(r.tp);
    r.precision = r.tp + r.fp ? tp / static_cast<double>(r.tp + r.fp) : 0.0;
    r.recall = r.tp + r.fn ? tp / static_cast<double>(r.tp + r.fn) : 0.0;
    r.f1 = r.tp ? 2.0 * tp / static_cast<double>(2 * r.tp + r.fp + r.fn) : 0.0;
    return r;
}

}  // namespace ragkit::eval
