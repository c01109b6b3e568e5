#include "ragkit/retrieval.hpp"

#include <algorithm>
#include <map>

#include "ragkit/text_util.hpp"

namespace ragkit::retrieval {

using nlohmann::json;

void RetrievalConfig::validate() const {
    if (k < 1) throw std::invalid_argument("retrieval.k must be at least 1");
    if (candidate_multiplier < 1) throw std::invalid_argument("retrieval.candidate_multiplier must be at least 1");
}

RetrievalConfig RetrievalConfig::from_json(const json& j) {
    RetrievalConfig c;
    if (!j.is_object()) throw std::invalid_argument("retrieval section must be an object");
    for (const auto& [key, value] : j.items()) {
        if (key == "k") c.k = value.get<std::size_t>();
        else if (key == "candidate_multiplier") c.candidate_multiplier = value.get<std::size_t>();
        else if (key == "kbs") c.kbs = value.get<std::vector<std::string>>();
        else if (key == "filter") c.filter = index::FilterExpr::from_json(value);
        else if (key == "rerank_scope") {
            const auto s = value.get<std::string>();
            if (s == "merged") c.rerank_scope = RerankScope::merged;
            else if (s == "per_kb") c.rerank_scope = RerankScope::per_kb;
            else throw std::invalid_argument("retrieval.rerank_scope must be 'merged' or 'per_kb'");
        } else if (key == "similarity") c.similarity = index::similarity_from_string(value.get<std::string>());
        else throw std::invalid_argument("unknown key retrieval." + key);
    }
    c.validate();
    return c;
}

json RetrievalConfig::to_json() const {
    return {{"k", k},
            {"candidate_multiplier", candidate_multiplier},
            {"kbs", kbs},
            {"filter", filter.to_json()},
            {"rerank_scope", rerank_scope == RerankScope::merged ? "merged" : "per_kb"},
            {"similarity", index::to_string(similarity)}};
}

json to_json(const RetrievalCandidate& c) {
    json j{{"rank", c.rank},
           {"chunk_id", c.chunk_id},
           {"kb_id", c.kb_id},
           {"doc_id", c.doc_id},
           {"start", c.start},
           {"end", c.end},
           {"hamming", c.hamming},
           {"embed_score", c.embed_score},
           {"rerank_score", c.rerank_score ? json(*c.rerank_score) : json(nullptr)},
           {"metadata", c.metadata},
           {"text", c.text}};
    return j;
}

json to_json(const PipelineResult& r) {
    json candidates = json::array();
    for (const auto& c : r.candidates) candidates.push_back(to_json(c));
    return {{"query", r.rewrite.query},
            {"rewrite_fallback", r.rewrite.fallback},
            {"rerank_fallback", r.rerank_fallback},
            {"warnings", r.warnings},
            {"candidates", candidates}};
}

// ============================================================================
// Stages
// ============================================================================

RewriteResult rewrite_query(gateway::ModelGateway& gw, const std::string& raw_query,
                            const ConversationContext& context) {
    RewriteResult out;
    try {
        const auto text = gw.generate("query_rewrite", {{"summary", context.summary},
                                                        {"previous_turn", context.previous_turn},
                                                        {"query", raw_query}});
        out.query = std::string(trim(text));
        if (out.query.empty()) {
            out.query = raw_query;
            out.fallback = true;
            out.warning = "query rewrite returned empty text; using the raw query";
        }
    } catch (const gateway::GatewayError& e) {
        out.query = raw_query;
        out.fallback = true;
        out.warning = std::string("query rewrite failed (") + e.what() + "); using the raw query";
    }
    return out;
}

RetrieveResult search(const index::KbRegistry& registry, const index::Embedding& query_vector,
                      const RetrievalConfig& config) {
    config.validate();
    RetrieveResult out;
    const auto kbs = config.kbs.empty() ? registry.ids() : config.kbs;
    const std::size_t n = config.candidate_multiplier * config.k;
    const auto code = index::binarize(query_vector);
    for (const auto& kb : kbs) {
        const auto idx = registry.get(kb);
        if (idx->size() == 0) continue;
        if (idx->dim() != query_vector.size()) {
            throw std::invalid_argument("query embedding has " + std::to_string(query_vector.size()) +
                                        " dimensions, knowledge base '" + kb + "' has " + std::to_string(idx->dim()));
        }
        const auto scored = index::rescore(query_vector, idx->hamming_top_n(code, config.filter, n), config.similarity,
                                           &out.warnings);
        for (const auto& s : scored) {
            RetrievalCandidate c;
            c.chunk_id = s.entry->chunk_id;
            c.kb_id = idx->kb_id();
            c.doc_id = s.entry->doc_id;
            c.text = s.entry->text;
            c.metadata = s.entry->metadata;
            c.start = s.entry->start;
            c.end = s.entry->end;
            c.hamming = s.hamming;
            c.embed_score = s.score;
            out.pool.push_back(std::move(c));
        }
    }
    return out;
}

RetrieveResult retrieve(gateway::ModelGateway& gw, const index::KbRegistry& registry, const std::string& query,
                        const RetrievalConfig& config) {
    config.validate();
    const auto vectors = gw.embed({query});
    return search(registry, vectors.at(0), config);
}

namespace {

bool by_embed(const RetrievalCandidate& a, const RetrievalCandidate& b) {
    if (a.embed_score != b.embed_score) return a.embed_score > b.embed_score;
    if (a.chunk_id != b.chunk_id) return a.chunk_id < b.chunk_id;
    return a.kb_id < b.kb_id;
}

bool by_rerank(const RetrievalCandidate& a, const RetrievalCandidate& b) {
    if (*a.rerank_score != *b.rerank_score) return *a.rerank_score > *b.rerank_score;
    return by_embed(a, b);
}

void score_group(gateway::ModelGateway& gw, const std::string& query, std::vector<RetrievalCandidate*>& group) {
    std::vector<std::string> passages;
    passages.reserve(group.size());
    for (const auto* c : group) passages.push_back(c->text);
    const auto scores = gw.rerank(query, passages);
    for (std::size_t i = 0; i < group.size(); ++i) group[i]->rerank_score = scores[i];
}

}  // namespace

SelectResult rerank_and_select(gateway::ModelGateway& gw, const std::string& query,
                               std::vector<RetrievalCandidate> candidates, std::size_t k, RerankScope scope) {
    if (k < 1) throw std::invalid_argument("k must be at least 1");
    SelectResult out;
    if (!candidates.empty()) {
        try {
            if (scope == RerankScope::merged) {
                std::vector<RetrievalCandidate*> all;
                for (auto& c : candidates) all.push_back(&c);
                score_group(gw, query, all);
            } else {
                std::map<std::string, std::vector<RetrievalCandidate*>> groups;
                for (auto& c : candidates) groups[c.kb_id].push_back(&c);
                for (auto& [kb, group] : groups) score_group(gw, query, group);
            }
            std::sort(candidates.begin(), candidates.end(), by_rerank);
        } catch (const gateway::GatewayError& e) {
            for (auto& c : candidates) c.rerank_score.reset();
            std::sort(candidates.begin(), candidates.end(), by_embed);
            out.rerank_fallback = true;
            out.warning = std::string("rerank failed (") + e.what() + "); ordered by embedding score";
        }
    }
    if (candidates.size() > k) candidates.resize(k);
    for (std::size_t i = 0; i < candidates.size(); ++i) candidates[i].rank = i + 1;
    out.selected = std::move(candidates);
    return out;
}

std::shared_ptr<const index::VectorIndex> build_index(gateway::ModelGateway& gw, const std::string& kb_id,
                                                     const std::vector<chunking::Chunk>& chunks, std::size_t batch_size) {
    if (chunks.empty()) throw std::invalid_argument("cannot build knowledge base '" + kb_id + "' from zero chunks");
    if (batch_size == 0) throw std::invalid_argument("batch size must be positive");
    std::vector<index::IndexEntry> entries;
    entries.reserve(chunks.size());
    for (std::size_t first = 0; first < chunks.size(); first += batch_size) {
        const std::size_t last = std::min(chunks.size(), first + batch_size);
        std::vector<std::string> texts;
        for (std::size_t i = first; i < last; ++i) texts.push_back(chunks[i].text);
        auto vectors = gw.embed(texts);
        for (std::size_t i = first; i < last; ++i) {
            index::IndexEntry e;
            e.chunk_id = chunks[i].chunk_id;
            e.doc_id = chunks[i].doc_id;
            e.text = chunks[i].text;
            e.embedding = std::move(vectors[i - first]);
            e.metadata = chunks[i].metadata;
            e.start = chunks[i].span.start;
            e.end = chunks[i].span.end;
            entries.push_back(std::move(e));
        }
    }
    const std::size_t dim = entries.front().embedding.size();
    return std::make_shared<const index::VectorIndex>(kb_id, dim, std::move(entries));
}

PipelineResult run_pipeline(gateway::ModelGateway& gw, const index::KbRegistry& registry, const std::string& raw_query,
                            const ConversationContext& context, const RetrievalConfig& config) {
    PipelineResult out;
    out.rewrite = rewrite_query(gw, raw_query, context);
    if (out.rewrite.fallback) out.warnings.push_back(out.rewrite.warning);
    auto found = retrieve(gw, registry, out.rewrite.query, config);
    out.warnings.insert(out.warnings.end(), found.warnings.begin(), found.warnings.end());
    auto selected = rerank_and_select(gw, out.rewrite.query, std::move(found.pool), config.k, config.rerank_scope);
    out.rerank_fallback = selected.rerank_fallback;
    if (selected.rerank_fallback) out.warnings.push_back(selected.warning);
    out.candidates = std::move(selected.selected);
    return out;
}

}  // namespace ragkit::retrieval
