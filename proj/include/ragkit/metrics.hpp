#pragma once

#include <cstddef>
#include <cstdint>
#include <climits>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "ragkit/text_util.hpp"

namespace ragkit::eval {

class MetricError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ============================================================================
// Token-level retrieval metrics
// ============================================================================

struct DocRange {
    std::string doc_id;
    ByteSpan span;
};

struct RetrievalEvalSample {
    std::string query_id;
    std::string query;
    std::vector<DocRange> gold;
    std::vector<DocRange> retrieved;  // ranked, best first
};

using TokenPos = std::uint64_t;

// Maps byte ranges to token positions. With document text, a token is a
// whitespace-delimited word and a range covers every word its bytes touch;
// without it, every byte is a token.
class TokenSpace {
public:
    TokenSpace() = default;
    explicit TokenSpace(std::map<std::string, std::string> docs);

    bool has_text(const std::string& doc_id) const { return words_.count(doc_id) > 0; }
    std::vector<TokenPos> positions(const DocRange& range) const;

private:
    std::uint64_t doc_number(const std::string& doc_id) const;

    std::map<std::string, std::vector<ByteSpan>> words_;
    mutable std::map<std::string, std::uint64_t> doc_numbers_;
    std::shared_ptr<std::mutex> mutex_ = std::make_shared<std::mutex>();
};

struct TokenCounts {
    std::size_t intersection = 0;  // |set(R) ∩ G|
    std::size_t retrieved = 0;     // |R| counting duplicates
    std::size_t gold = 0;          // |G|
    std::size_t gold_missed = 0;   // |G \ set(R)|
};

struct TokenMetrics {
    double iou = 0.0;
    double precision = 0.0;
    double recall = 0.0;
};

// `retrieved` is a multiset; `gold` is deduplicated. Throws MetricError on
// empty gold.
TokenCounts token_counts(const std::vector<TokenPos>& retrieved, const std::vector<TokenPos>& gold);
TokenMetrics token_metrics(const TokenCounts& counts);
TokenMetrics token_metrics(const std::vector<TokenPos>& retrieved, const std::vector<TokenPos>& gold);

struct SampleTokenResult {
    std::string query_id;
    std::optional<TokenMetrics> metrics;  // empty when excluded
    std::optional<TokenCounts> counts;
    std::string excluded_reason;
};

SampleTokenResult sample_token_metrics(const RetrievalEvalSample& sample, const TokenSpace& space, std::size_t at);

struct AggregateTokenMetrics {
    TokenMetrics macro;
    TokenMetrics micro;
    std::size_t evaluated = 0;
    std::size_t excluded = 0;
};

AggregateTokenMetrics aggregate_token_metrics(const std::vector<SampleTokenResult>& results);

// A retrieved range is relevant when it covers at least one gold token.
bool is_relevant(const DocRange& chunk, const std::vector<DocRange>& gold, const TokenSpace& space);

struct DocPassageRecall {
    double doc_recall = 0.0;
    double passage_recall = 0.0;
};

// Per query: doc recall = gold documents with a relevant retrieved chunk /
// gold documents; passage recall = relevant retrieved chunks / retrieved
// chunks (0 with nothing retrieved). Macro-averaged. Throws on an empty set.
DocPassageRecall doc_passage_recall(const std::vector<RetrievalEvalSample>& samples, const TokenSpace& space,
                                    std::size_t at = SIZE_MAX);

// 1-based rank of the first relevant chunk within the top n.
std::optional<std::size_t> first_relevant_rank(const RetrievalEvalSample& sample, const TokenSpace& space,
                                               std::size_t n);
double ref_retrieved_ratio_at(const std::vector<RetrievalEvalSample>& samples, const TokenSpace& space, std::size_t n);
double mrr_at(const std::vector<RetrievalEvalSample>& samples, const TokenSpace& space, std::size_t n);

// Same metrics from precomputed first-relevant ranks (nullopt = none).
double ref_retrieved_ratio_at(const std::vector<std::optional<std::size_t>>& first_ranks, std::size_t n);
double mrr_at(const std::vector<std::optional<std::size_t>>& first_ranks, std::size_t n);

// ============================================================================
// Text, judges, classification
// ============================================================================

// Levenshtein distance over Unicode code points.
std::size_t levenshtein(std::u32string_view a, std::u32string_view b);
// 1 - LD / max(len); two empty strings score 1.
double nls(std::string_view pred, std::string_view gold);

struct JudgePanelResult {
    double mean = 0.0;                             // of the usable normalized scores
    std::vector<std::optional<double>> per_judge;  // 0..100, nullopt when unusable
    std::vector<std::string> flags;
};

double normalize_judge_score(int score);  // x20
// Throws MetricError when no judge produced a usable score.
JudgePanelResult aggregate_judge_scores(const std::vector<std::optional<int>>& scores,
                                        const std::vector<std::string>& judge_names = {});

struct EvaluatorTally {
    std::size_t wins = 0;    // A preferred
    std::size_t ties = 0;
    std::size_t losses = 0;  // B preferred
};

// Mean over evaluators of (wins + 0.5 ties) / (wins + ties + losses).
double win_rate(const std::vector<EvaluatorTally>& tally);

using OptionSet = std::set<std::string>;

// "A,C", "A C" or "AC" -> {"A","C"}.
OptionSet parse_options(std::string_view text);

struct McqaScore {
    double accuracy = 0.0;
    double iou = 0.0;
};

McqaScore mcqa_score(const std::vector<OptionSet>& predictions, const std::vector<OptionSet>& gold);
double option_iou(const OptionSet& pred, const OptionSet& gold);

struct BinaryF1 {
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
    double precision = 0.0, recall = 0.0, f1 = 0.0;
};

// Positive class = true (hallucinated). 0/0 ratios are 0.
BinaryF1 hallucination_f1(const std::vector<bool>& predicted, const std::vector<bool>& gold);

}  // namespace ragkit::eval
