#include <gtest/gtest.h>

#include "ragkit/retrieval.hpp"
#include "helpers.hpp"

using namespace ragkit;
using namespace ragkit::retrieval;
using namespace ragkit::gateway;

namespace {

ModelGateway gw_with(std::shared_ptr<TextGenerator> gen, std::shared_ptr<Reranker> rr = nullptr,
                     std::shared_ptr<Embedder> emb = nullptr) {
    return ModelGateway(std::move(gen), emb ? emb : std::make_shared<HashingEmbedder>(256),
                        rr ? rr : std::make_shared<LexicalOverlapReranker>());
}

RetrievalCandidate cand(const std::string& id, double embed_score, const std::string& kb = "kb") {
    RetrievalCandidate c;
    c.chunk_id = id;
    c.kb_id = kb;
    c.text = "passage " + id;
    c.embed_score = embed_score;
    return c;
}

std::vector<std::string> ids(const std::vector<RetrievalCandidate>& cs) {
    std::vector<std::string> out;
    for (const auto& c : cs) out.push_back(c.chunk_id);
    return out;
}

}  // namespace

TEST(Rewrite, IdentityTemplateWithEchoReturnsRaw) {
    auto prompts = PromptAssets::builtin();
    prompts.set("query_rewrite", "{query}");
    ModelGateway gw(std::make_shared<EchoGenerator>(), std::make_shared<HashingEmbedder>(8),
                    std::make_shared<ConstantReranker>(), prompts);
    const auto r = rewrite_query(gw, "what is NDVI?");
    EXPECT_EQ(r.query, "what is NDVI?");
    EXPECT_FALSE(r.fallback);
}

TEST(Rewrite, ScriptedFollowUpUsesSummary) {
    auto gen = std::make_shared<ScriptedGenerator>();
    gen->add(
        [](const MockRequest& r) {
            return r.params.task == "query_rewrite" && r.var("query") == "its resolution?" &&
                   r.var("summary").find("Sentinel-2 MSI") != std::string::npos;
        },
        reply("What is the spatial resolution of the Sentinel-2 MSI sensor?"));
    auto gw = gw_with(gen);
    const auto r = rewrite_query(gw, "its resolution?", {"User asked about Sentinel-2 MSI.", ""});
    EXPECT_EQ(r.query, "What is the spatial resolution of the Sentinel-2 MSI sensor?");
    EXPECT_NE(gen->call_log()[0].prompt.find("Sentinel-2 MSI"), std::string::npos);
}

TEST(Rewrite, FailureFallsBackToRaw) {
    auto gw = gw_with(std::make_shared<FailingGenerator>(ErrorKind::timeout));
    const auto r = rewrite_query(gw, "raw q");
    EXPECT_EQ(r.query, "raw q");
    EXPECT_TRUE(r.fallback);
    EXPECT_FALSE(r.warning.empty());
}

TEST(Search, SmallKbReturnsEverything) {
    index::KbRegistry reg;
    reg.put(testing_util::hashed_index("kb", {"alpha one", "beta two", "gamma three"}));
    auto gw = make_mock_gateway();
    RetrievalConfig cfg;
    cfg.k = 10;
    const auto r = retrieve(gw, reg, "alpha", cfg);
    EXPECT_EQ(r.pool.size(), 3u);
    for (std::size_t i = 1; i < r.pool.size(); ++i) EXPECT_GE(r.pool[i - 1].embed_score, r.pool[i].embed_score);
}

TEST(Search, PerKbCandidateCap) {
    index::KbRegistry reg;
    reg.put(testing_util::hashed_index("a", testing_util::earth_texts()));
    reg.put(testing_util::hashed_index("b", testing_util::earth_texts()));
    auto gw = make_mock_gateway();
    RetrievalConfig cfg;
    cfg.k = 1;
    cfg.candidate_multiplier = 2;
    const auto r = retrieve(gw, reg, "radar imagery", cfg);
    std::map<std::string, int> per;
    for (const auto& c : r.pool) ++per[c.kb_id];
    EXPECT_LE(r.pool.size(), 4u);
    for (const auto& [kb, n] : per) EXPECT_LE(n, 2) << kb;
    const auto sel = rerank_and_select(gw, "radar imagery", r.pool, cfg.k);
    EXPECT_EQ(sel.selected.size(), 1u);
}

TEST(Search, EmptyQueryRejectedByEmbedder) {
    index::KbRegistry reg;
    reg.put(testing_util::hashed_index("kb", {"alpha"}));
    auto gw = make_mock_gateway();
    EXPECT_THROW(retrieve(gw, reg, "   ", {}), GatewayError);
}

TEST(Search, UnknownKbAndDimensionMismatch) {
    index::KbRegistry reg;
    reg.put(testing_util::hashed_index("kb", {"alpha"}, 64));
    RetrievalConfig cfg;
    cfg.kbs = {"missing"};
    EXPECT_THROW(search(reg, index::Embedding(64, 1.0f), cfg), index::UnknownKbError);
    EXPECT_THROW(search(reg, index::Embedding(32, 1.0f), {}), std::invalid_argument);
}

TEST(Search, FilterRestrictsPool) {
    index::KbRegistry reg;
    reg.put(testing_util::hashed_index("a", {"alpha one"}));
    reg.put(testing_util::hashed_index("b", {"alpha two"}));
    RetrievalConfig cfg;
    cfg.filter = index::FilterExpr::parse("source=b");
    auto gw = make_mock_gateway();
    const auto r = retrieve(gw, reg, "alpha", cfg);
    ASSERT_EQ(r.pool.size(), 1u);
    EXPECT_EQ(r.pool[0].kb_id, "b");
}

TEST(Select, LargeKReturnsWholeSortedPool) {
    auto gw = gw_with(std::make_shared<EchoGenerator>(), std::make_shared<ConstantReranker>());
    const auto r = rerank_and_select(gw, "q", {cand("b", 0.2), cand("a", 0.9), cand("c", 0.5)}, 10);
    EXPECT_EQ(ids(r.selected), (std::vector<std::string>{"a", "c", "b"}));
    EXPECT_EQ(r.selected[0].rank, 1u);
    EXPECT_EQ(r.selected[2].rank, 3u);
}

TEST(Select, RerankerReversal) {
    auto rev = std::make_shared<ScriptedReranker>([](const std::string&, const std::vector<std::string>& ps) {
        std::vector<double> s;
        for (const auto& p : ps) s.push_back(p == "passage a" ? 0.0 : p == "passage b" ? 1.0 : 2.0);
        return s;
    });
    auto gw = gw_with(std::make_shared<EchoGenerator>(), rev);
    const auto r = rerank_and_select(gw, "q", {cand("a", 0.9), cand("b", 0.5), cand("c", 0.1)}, 3);
    EXPECT_EQ(ids(r.selected), (std::vector<std::string>{"c", "b", "a"}));
    EXPECT_FALSE(r.rerank_fallback);
    EXPECT_DOUBLE_EQ(*r.selected[0].rerank_score, 2.0);
}

TEST(Select, RerankFailureFallsBackToEmbedOrder) {
    auto gw = gw_with(std::make_shared<EchoGenerator>(), std::make_shared<FailingReranker>());
    const auto r = rerank_and_select(gw, "q", {cand("b", 0.2), cand("a", 0.9)}, 5);
    EXPECT_EQ(ids(r.selected), (std::vector<std::string>{"a", "b"}));
    EXPECT_TRUE(r.rerank_fallback);
    EXPECT_FALSE(r.warning.empty());
    EXPECT_FALSE(r.selected[0].rerank_score.has_value());
}

TEST(Select, TieBreakChain) {
    auto gw = gw_with(std::make_shared<EchoGenerator>(), std::make_shared<ConstantReranker>(1.0));
    const auto r = rerank_and_select(gw, "q", {cand("b", 0.5, "y"), cand("b", 0.5, "x"), cand("a", 0.5), cand("z", 0.7)}, 4);
    EXPECT_EQ(ids(r.selected), (std::vector<std::string>{"z", "a", "b", "b"}));
    EXPECT_EQ(r.selected[2].kb_id, "x");
}

TEST(Select, PerKbScopeCallsRerankerPerKb) {
    auto gw = make_mock_gateway();
    rerank_and_select(gw, "q", {cand("a", 0.1, "k1"), cand("b", 0.2, "k2"), cand("c", 0.3, "k1")}, 3,
                      RerankScope::per_kb);
    EXPECT_EQ(gw.log().count_role("rerank"), 2u);
}

TEST(Pipeline, EndToEndWithMockStack) {
    index::KbRegistry reg;
    reg.put(testing_util::hashed_index("earth", testing_util::earth_texts()));
    auto gw = make_mock_gateway();
    RetrievalConfig cfg;
    cfg.k = 3;
    const auto r = run_pipeline(gw, reg, "Sentinel-2 spatial resolution", {}, cfg);
    ASSERT_EQ(r.candidates.size(), 3u);
    EXPECT_NE(r.candidates[0].text.find("Sentinel-2"), std::string::npos);
    EXPECT_EQ(gw.log().count_role("generate"), 1u);
    EXPECT_EQ(gw.log().count_role("embed"), 1u);
    EXPECT_EQ(gw.log().count_role("rerank"), 1u);
    const auto j = to_json(r);
    EXPECT_EQ(j["candidates"].size(), 3u);
}

TEST(Pipeline, BuildIndexBatchesEmbedCalls) {
    auto gw = make_mock_gateway(32);
    std::vector<chunking::Chunk> chunks;
    for (int i = 0; i < 5; ++i) chunks.push_back(testing_util::make_chunk("d", i, "chunk text " + std::to_string(i)));
    const auto idx = build_index(gw, "kb", chunks, 2);
    EXPECT_EQ(idx->size(), 5u);
    EXPECT_EQ(idx->dim(), 32u);
    EXPECT_EQ(gw.log().count_role("embed"), 3u);
    EXPECT_THROW(build_index(gw, "kb", {}, 2), std::invalid_argument);
}

TEST(Config, RetrievalConfigJson) {
    const auto c = RetrievalConfig::from_json({{"k", 5}, {"rerank_scope", "per_kb"}, {"filter", "source=a"}});
    EXPECT_EQ(c.k, 5u);
    EXPECT_EQ(c.rerank_scope, RerankScope::per_kb);
    EXPECT_EQ(RetrievalConfig::from_json(c.to_json()).to_json(), c.to_json());
    EXPECT_THROW(RetrievalConfig::from_json({{"k", 0}}), std::invalid_argument);
    EXPECT_THROW(RetrievalConfig::from_json({{"bogus", 0}}), std::invalid_argument);
}
