#include <gtest/gtest.h>

#include "ragkit/hallucination.hpp"
#include "halluc_scenarios.hpp"

using namespace ragkit;
using namespace ragkit::hallucination;
using namespace ragkit::gateway;

class Branches : public ::testing::TestWithParam<scenarios::Branch> {};

TEST_P(Branches, ExpectedOutcomeAndCallCounts) {
    const auto& b = GetParam();
    scenarios::Harness h(b);
    const auto t = h.run();
    EXPECT_EQ(scenarios::check(b, t, *h.gw), "") << b.name;
}

INSTANTIATE_TEST_SUITE_P(StateMachine, Branches, ::testing::ValuesIn(scenarios::branches()),
                         [](const auto& info) { return info.param.name; });

TEST(Detect, Verdicts) {
    auto ok = make_mock_gateway();
    auto grounded = ModelGateway(std::make_shared<ConstantGenerator>(R"({"hallucinated": false})"),
                                 std::make_shared<HashingEmbedder>(8), std::make_shared<ConstantReranker>());
    const auto g = detect(grounded, "q", "a", "e");
    EXPECT_EQ(g.label, Label::grounded);
    EXPECT_EQ(g.justification, "");
    auto flag = ModelGateway(std::make_shared<ConstantGenerator>(R"({"hallucinated": true, "justification": "R"})"),
                             std::make_shared<HashingEmbedder>(8), std::make_shared<ConstantReranker>());
    const auto f = detect(flag, "q", "a", "e");
    EXPECT_EQ(f.label, Label::hallucinated);
    EXPECT_EQ(f.justification, "R");
    auto bad = ModelGateway(std::make_shared<ConstantGenerator>("maybe"), std::make_shared<HashingEmbedder>(8),
                            std::make_shared<ConstantReranker>());
    const auto m = detect(bad, "q", "a", "e");
    EXPECT_EQ(m.label, Label::hallucinated);
    EXPECT_EQ(m.justification, "parse-failure");
    EXPECT_TRUE(m.parse_failure);
}

TEST(Detect, HallucinatedVerdictAlwaysHasJustification) {
    const auto v = parse_verdict(R"({"hallucinated": true})");
    ASSERT_TRUE(v);
    EXPECT_FALSE(v->justification.empty());
    EXPECT_FALSE(parse_verdict(R"({"hallucinated": "yes"})"));
}

TEST(Preference, Parsing) {
    EXPECT_EQ(parse_preference(R"({"preferred": "revised"})"), Preference::revised);
    EXPECT_EQ(parse_preference("Original"), Preference::original);
    EXPECT_EQ(parse_preference("tie"), Preference::tie);
    EXPECT_FALSE(parse_preference("both"));
}

TEST(Reformulate, ScriptedMappingUsesJustification) {
    scenarios::Branch b = scenarios::branches()[2];
    scenarios::Harness h(b);
    h.run();
    bool seen = false;
    for (const auto& r : h.gen->call_log()) {
        if (r.params.task != "query_reformulate") continue;
        seen = true;
        EXPECT_EQ(r.var("question"), scenarios::kQuestion);
        EXPECT_EQ(r.var("justification"), "revisit is 16 days");
    }
    EXPECT_TRUE(seen);
}

TEST(Revise, PromptCarriesBothEvidenceSets) {
    scenarios::Branch b = scenarios::branches()[2];
    scenarios::Harness h(b);
    const auto t = h.run();
    ASSERT_TRUE(t.new_candidates);
    ASSERT_FALSE(t.new_candidates->empty());
    for (const auto& r : h.gen->call_log()) {
        if (r.params.task != "answer_revise") continue;
        EXPECT_NE(r.prompt.find("Prior evidence: Landsat missions"), std::string::npos);
        EXPECT_NE(r.prompt.find((*t.new_candidates)[0].text), std::string::npos);
    }
    EXPECT_EQ(*t.critique, "3 days is wrong");
}

TEST(Revise, PlainTextResponseIsTheRevision) {
    scenarios::Branch b = scenarios::branches()[2];
    scenarios::Harness h(b);
    auto gen = std::make_shared<ScriptedGenerator>();
    gen->on_task("hallucination_detect", scenarios::kFlag)
        .on_task("query_reformulate", "q2")
        .on_task("answer_revise", "A plain revised answer.")
        .on_task("answer_rank", "revised");
    ModelGateway gw(gen, std::make_shared<HashingEmbedder>(256), std::make_shared<ConstantReranker>());
    Pipeline p(gw, h.registry, {});
    const auto t = p.run("q", "a", {});
    EXPECT_EQ(t.final_answer, "A plain revised answer.");
    EXPECT_EQ(*t.critique, "");
}

TEST(Retrieve, FailureIsFlaggedAndAnswerReturned) {
    auto gen = std::make_shared<ScriptedGenerator>();
    gen->on_task("hallucination_detect", scenarios::kFlag)
        .on_task("query_reformulate", "q2")
        .on_task("answer_revise", R"({"revised_answer": "r", "critique": "c"})")
        .on_task("answer_rank", "revised");
    ModelGateway gw(gen, std::make_shared<FailingEmbedder>(), std::make_shared<ConstantReranker>());
    index::KbRegistry reg;
    Pipeline p(gw, reg, {});
    const auto t = p.run("q", "a", {});
    EXPECT_TRUE(t.flagged());
    EXPECT_EQ(t.final_answer, "r");
    EXPECT_TRUE(is_legal_step_log(t.step_log));
}

TEST(Trace, JsonShape) {
    scenarios::Harness h(scenarios::branches()[0]);
    const auto j = to_json(h.run());
    EXPECT_EQ(j["verdict"]["label"], "grounded");
    EXPECT_EQ(j["step_log"], nlohmann::json({"detect", "end"}));
    EXPECT_FALSE(j.contains("revised_answer"));
}

TEST(Trace, LegalPaths) {
    EXPECT_TRUE(is_legal_step_log({"detect", "end"}));
    EXPECT_TRUE(is_legal_step_log({"detect", "reformulate", "retrieve", "revise", "rank", "end"}));
    EXPECT_FALSE(is_legal_step_log({"detect", "revise", "end"}));
    EXPECT_FALSE(is_legal_step_log({}));
}
