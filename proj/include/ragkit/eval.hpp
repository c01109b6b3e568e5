#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ragkit/corpus.hpp"
#include "ragkit/gateway.hpp"
#include "ragkit/metrics.hpp"

namespace ragkit::eval {

inline constexpr int kReportVersion = 1;

struct EvalReport {
    std::string kind;
    std::map<std::string, double> metrics;
    nlohmann::json samples = nlohmann::json::array();
    nlohmann::json config = nlohmann::json::object();
    std::vector<std::string> flags;

    // {"v", "kind", "metrics", "samples", "config", "flags"}
    nlohmann::json to_json() const;
    std::string metrics_csv() const;  // metric,value
    std::string samples_csv() const;  // one row per sample, scalar fields only
};

// ============================================================================
// Retrieval
// ============================================================================

// samples: {"query_id", "query", "gold": [{"doc_id","start","end"}]}
// runs:    {"query_id", "retrieved" | "candidates": [{"doc_id","start","end"}]} (ranked)
std::vector<RetrievalEvalSample> load_retrieval_samples(const std::filesystem::path& samples,
                                                        const std::filesystem::path& runs);

// doc_id -> text from a JSON-lines file of documents with "id" and "text".
std::map<std::string, std::string> load_doc_texts(const std::filesystem::path& docs);

struct RetrievalEvalOptions {
    std::size_t at = 10;
    bool micro = false;  // report micro averages as the headline token metrics
};

EvalReport eval_retrieval(const std::vector<RetrievalEvalSample>& samples, const TokenSpace& space,
                          const RetrievalEvalOptions& options);

// ============================================================================
// OCR
// ============================================================================

// pred/gold lines {"id", "text"}, joined on id.
EvalReport eval_ocr(const std::vector<nlohmann::json>& pred, const std::vector<nlohmann::json>& gold);

// ============================================================================
// Judges
// ============================================================================

JudgePanelResult judge_panel_score(const std::string& question, const std::string& answer,
                                   const std::string& reference, const std::optional<std::string>& context,
                                   std::vector<gateway::Judge>& judges);

// answers lines {"id", "question", "answer", "reference"[, "context"]}.
EvalReport eval_judge(const std::vector<nlohmann::json>& answers, std::vector<gateway::Judge>& judges);

// a/b lines {"id", "question", "reference", "answer"}, joined on id. Each
// judge is one evaluator.
EvalReport eval_pairwise(const std::vector<nlohmann::json>& a, const std::vector<nlohmann::json>& b,
                         std::vector<gateway::Judge>& judges);

// pred/gold lines {"id", "answer": "A,C"}.
EvalReport eval_mcqa(const std::vector<nlohmann::json>& pred, const std::vector<nlohmann::json>& gold);

// pred/gold lines {"id", "hallucinated": bool}.
EvalReport eval_hallucination(const std::vector<nlohmann::json>& pred, const std::vector<nlohmann::json>& gold);

// ============================================================================
// Semi-synthetic eval sets
// ============================================================================

struct SyntheticOptions {
    std::size_t passage_words = 200;  // words per prompt window
    std::size_t per_doc = 1;
};

struct SyntheticResult {
    std::vector<nlohmann::json> samples;  // retrieval sample lines
    std::vector<std::string> flags;
};

// Asks the generator for a (query, excerpt) pair per passage window and
// locates the excerpt in the document to produce a byte-range gold set.
SyntheticResult generate_eval_set(gateway::ModelGateway& gw, const std::vector<corpus::CleanDocument>& docs,
                                  const SyntheticOptions& options = {});

}  // namespace ragkit::eval
