#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ragkit/chunker.hpp"
#include "ragkit/gateway.hpp"
#include "ragkit/vector_index.hpp"

namespace ragkit::retrieval {

enum class RerankScope { merged, per_kb };

struct RetrievalConfig {
    std::size_t k = 10;
    std::size_t candidate_multiplier = 2;
    std::vector<std::string> kbs;  // empty = every registered KB
    index::FilterExpr filter;
    RerankScope rerank_scope = RerankScope::merged;
    index::Similarity similarity = index::Similarity::cosine;

    void validate() const;
    static RetrievalConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

struct RetrievalCandidate {
    std::string chunk_id;
    std::string kb_id;
    std::string doc_id;
    std::string text;
    index::Metadata metadata;
    std::size_t start = 0;
    std::size_t end = 0;
    std::size_t hamming = 0;
    double embed_score = 0.0;
    std::optional<double> rerank_score;
    std::size_t rank = 0;  // 1-based once selected
};

nlohmann::json to_json(const RetrievalCandidate& c);

struct ConversationContext {
    std::string summary;
    std::string previous_turn;
};

struct RewriteResult {
    std::string query;
    bool fallback = false;
    std::string warning;
};

// Falls back to the raw query when the gateway fails.
RewriteResult rewrite_query(gateway::ModelGateway& gw, const std::string& raw_query,
                            const ConversationContext& context = {});

struct RetrieveResult {
    std::vector<RetrievalCandidate> pool;  // rescored; per-KB lists concatenated in config.kbs order
    std::vector<std::string> warnings;
};

// Per KB: Hamming top-(multiplier*k) of the binarized query, then
// full-precision rescoring.
RetrieveResult search(const index::KbRegistry& registry, const index::Embedding& query_vector,
                      const RetrievalConfig& config);

// Embeds the query (one gateway call) and searches. Gateway errors propagate.
RetrieveResult retrieve(gateway::ModelGateway& gw, const index::KbRegistry& registry, const std::string& query,
                        const RetrievalConfig& config);

struct SelectResult {
    std::vector<RetrievalCandidate> selected;
    bool rerank_fallback = false;
    std::string warning;
};

// Orders by rerank score desc, then embed score desc, then chunk_id, keeps
// the first k. On rerank failure orders by embed score instead and flags.
SelectResult rerank_and_select(gateway::ModelGateway& gw, const std::string& query,
                               std::vector<RetrievalCandidate> candidates, std::size_t k,
                               RerankScope scope = RerankScope::merged);

struct PipelineResult {
    RewriteResult rewrite;
    std::vector<RetrievalCandidate> candidates;
    std::vector<std::string> warnings;
    bool rerank_fallback = false;
};

nlohmann::json to_json(const PipelineResult& r);

// Embeds chunk texts in batches and builds the index for one KB.
std::shared_ptr<const index::VectorIndex> build_index(gateway::ModelGateway& gw, const std::string& kb_id,
                                                     const std::vector<chunking::Chunk>& chunks,
                                                     std::size_t batch_size = 64);

// rewrite_query -> retrieve -> rerank_and_select.
PipelineResult run_pipeline(gateway::ModelGateway& gw, const index::KbRegistry& registry, const std::string& raw_query,
                            const ConversationContext& context, const RetrievalConfig& config);

}  // namespace ragkit::retrieval
