#include <gtest/gtest.h>

#include <random>

#include "ragkit/metrics.hpp"
#include "metric_suite.hpp"

using namespace ragkit;
using namespace ragkit::eval;

namespace {

std::vector<TokenPos> pos(std::initializer_list<TokenPos> v) { return v; }

}  // namespace

TEST(TokenMetrics, IdenticalAndDisjoint) {
    const auto same = token_metrics(pos({1, 2, 3}), pos({1, 2, 3}));
    EXPECT_DOUBLE_EQ(same.iou, 1.0);
    EXPECT_DOUBLE_EQ(same.precision, 1.0);
    EXPECT_DOUBLE_EQ(same.recall, 1.0);
    const auto none = token_metrics(pos({1, 2}), pos({3, 4}));
    EXPECT_DOUBLE_EQ(none.iou, 0.0);
    EXPECT_DOUBLE_EQ(none.precision, 0.0);
    EXPECT_DOUBLE_EQ(none.recall, 0.0);
}

TEST(TokenMetrics, SetArithmetic) {
    const auto m = token_metrics(pos({1, 2, 3, 4}), pos({3, 4, 5}));
    EXPECT_DOUBLE_EQ(m.iou, 2.0 / 5.0);
    EXPECT_DOUBLE_EQ(m.precision, 0.5);
    EXPECT_DOUBLE_EQ(m.recall, 2.0 / 3.0);
}

TEST(TokenMetrics, RedundantRetrievalIsPenalized) {
    const auto m = token_metrics(pos({3, 4, 3, 4}), pos({3, 4}));
    EXPECT_DOUBLE_EQ(m.recall, 1.0);
    EXPECT_DOUBLE_EQ(m.precision, 0.5);
    EXPECT_DOUBLE_EQ(m.iou, 0.5);
}

TEST(TokenMetrics, EmptyGoldIsExcludedWithReason) {
    EXPECT_THROW(token_counts(pos({1}), {}), MetricError);
    RetrievalEvalSample s{"q", "", {{"d", {3, 3}}}, {{"d", {0, 5}}}};
    const auto r = sample_token_metrics(s, TokenSpace(), 10);
    EXPECT_FALSE(r.metrics);
    EXPECT_FALSE(r.excluded_reason.empty());
    EXPECT_THROW(aggregate_token_metrics({r}), MetricError);
    RetrievalEvalSample good{"g", "", {{"d", {0, 5}}}, {{"d", {0, 5}}}};
    const auto agg = aggregate_token_metrics({r, sample_token_metrics(good, TokenSpace(), 10)});
    EXPECT_EQ(agg.excluded, 1u);
    EXPECT_EQ(agg.evaluated, 1u);
    EXPECT_DOUBLE_EQ(agg.macro.iou, 1.0);
}

TEST(TokenSpace, WordTokensCoverTouchedWords) {
    TokenSpace space(std::map<std::string, std::string>{{"d", "alpha beta gamma"}});
    EXPECT_EQ(space.positions({"d", {0, 1}}).size(), 1u);
    EXPECT_EQ(space.positions({"d", {4, 7}}).size(), 2u);
    EXPECT_EQ(space.positions({"d", {5, 6}}).size(), 0u);
    EXPECT_EQ(space.positions({"other", {0, 4}}).size(), 4u);
}

TEST(DocPassage, Counting) {
    const TokenSpace bytes;
    RetrievalEvalSample s{"q", "", {{"d", {10, 20}}}, {{"d", {0, 12}}, {"d", {15, 30}}, {"d", {40, 50}}}};
    const auto r = doc_passage_recall({s}, bytes);
    EXPECT_DOUBLE_EQ(r.passage_recall, 2.0 / 3.0);
    EXPECT_DOUBLE_EQ(r.doc_recall, 1.0);
    RetrievalEvalSample miss{"q", "", {{"d", {10, 20}}}, {{"d", {40, 50}}}};
    EXPECT_DOUBLE_EQ(doc_passage_recall({miss}, bytes).passage_recall, 0.0);
    EXPECT_THROW(doc_passage_recall({}, bytes), MetricError);
}

TEST(RankMetrics, SpotValues) {
    EXPECT_DOUBLE_EQ(ref_retrieved_ratio_at(std::vector<std::optional<std::size_t>>{1, 1}, 10), 1.0);
    EXPECT_DOUBLE_EQ(ref_retrieved_ratio_at(std::vector<std::optional<std::size_t>>{std::nullopt}, 10), 0.0);
    EXPECT_DOUBLE_EQ(ref_retrieved_ratio_at(std::vector<std::optional<std::size_t>>{1, 11}, 10), 0.5);
    EXPECT_DOUBLE_EQ(mrr_at(std::vector<std::optional<std::size_t>>{1, 1, 1}, 10), 1.0);
    EXPECT_NEAR(mrr_at(std::vector<std::optional<std::size_t>>{1, 2, 4}, 10), 7.0 / 12.0, 1e-12);
    EXPECT_DOUBLE_EQ(mrr_at(std::vector<std::optional<std::size_t>>{11, std::nullopt}, 10), 0.0);
}

TEST(RankMetrics, FromSamples) {
    const TokenSpace bytes;
    RetrievalEvalSample s{"q", "", {{"d", {10, 20}}}, {{"d", {0, 5}}, {"d", {12, 13}}}};
    EXPECT_EQ(first_relevant_rank(s, bytes, 10), 2u);
    EXPECT_FALSE(first_relevant_rank(s, bytes, 1));
    EXPECT_DOUBLE_EQ(mrr_at({s}, bytes, 10), 0.5);
}

TEST(Nls, SpotValues) {
    EXPECT_DOUBLE_EQ(nls("same", "same"), 1.0);
    EXPECT_DOUBLE_EQ(nls("", "abc"), 0.0);
    EXPECT_DOUBLE_EQ(nls("", ""), 1.0);
    EXPECT_NEAR(nls("kitten", "sitting"), 1.0 - 3.0 / 7.0, 1e-12);
    EXPECT_EQ(levenshtein(U"kitten", U"sitting"), 3u);
    EXPECT_DOUBLE_EQ(nls("\xC3\xA9t\xC3\xA9", "ete"), 1.0 - 2.0 / 3.0);
}

TEST(Judges, PanelAggregation) {
    EXPECT_DOUBLE_EQ(aggregate_judge_scores({5, 5, 5, 5}).mean, 100.0);
    EXPECT_DOUBLE_EQ(aggregate_judge_scores({0, 0}).mean, 0.0);
    EXPECT_DOUBLE_EQ(aggregate_judge_scores({5, 4, 4, 3}).mean, 80.0);
    const auto partial = aggregate_judge_scores({5, std::nullopt, 3}, {"a", "b", "c"});
    EXPECT_DOUBLE_EQ(partial.mean, 80.0);
    EXPECT_FALSE(partial.per_judge[1]);
    EXPECT_EQ(partial.flags.size(), 1u);
    EXPECT_THROW(aggregate_judge_scores({std::nullopt}), MetricError);
    EXPECT_DOUBLE_EQ(normalize_judge_score(3), 60.0);
}

TEST(WinRate, SpotValues) {
    EXPECT_DOUBLE_EQ(win_rate({{5, 0, 0}}), 1.0);
    EXPECT_EQ(win_rate({{1, 1, 0}}), 0.75);
    EXPECT_DOUBLE_EQ(win_rate({{2, 0, 2}, {0, 4, 0}}), 0.5);
    EXPECT_THROW(win_rate({{0, 0, 0}}), MetricError);
    EXPECT_THROW(win_rate({}), MetricError);
}

TEST(Mcqa, SpotValues) {
    EXPECT_EQ(parse_options("A,C"), (OptionSet{"A", "C"}));
    EXPECT_EQ(parse_options("a c"), (OptionSet{"A", "C"}));
    EXPECT_EQ(parse_options("AC"), (OptionSet{"A", "C"}));
    const auto perfect = mcqa_score({{"A"}, {"B", "C"}}, {{"A"}, {"B", "C"}});
    EXPECT_DOUBLE_EQ(perfect.accuracy, 1.0);
    EXPECT_DOUBLE_EQ(perfect.iou, 1.0);
    const auto half = mcqa_score({{"A"}}, {{"A", "C"}});
    EXPECT_DOUBLE_EQ(half.iou, 0.5);
    EXPECT_DOUBLE_EQ(half.accuracy, 0.0);
    EXPECT_DOUBLE_EQ(option_iou({}, {"A"}), 0.0);
}

TEST(F1, SpotValues) {
    EXPECT_DOUBLE_EQ(hallucination_f1({true, false}, {true, false}).f1, 1.0);
    EXPECT_DOUBLE_EQ(hallucination_f1({false, true}, {true, false}).f1, 0.0);
    // TP=2, FP=1, FN=1.
    const auto r = hallucination_f1({true, true, true, false, false}, {true, true, false, true, false});
    EXPECT_EQ(r.tp, 2u);
    EXPECT_NEAR(r.precision, 2.0 / 3.0, 1e-15);
    EXPECT_NEAR(r.recall, 2.0 / 3.0, 1e-15);
    EXPECT_NEAR(r.f1, 2.0 / 3.0, 1e-15);
}

TEST(Properties, OracleEquivalence) {
    for (const auto& r : metric_suite::all(300, 42, 1e-12)) {
        EXPECT_EQ(r.mismatches, 0u) << r.metric << ": " << r.first_mismatch;
        EXPECT_EQ(r.instances, 300u) << r.metric;
    }
}

TEST(Properties, WinRateComplement) {
    std::mt19937_64 rng(4);
    for (int i = 0; i < 1000; ++i) {
        std::vector<EvaluatorTally> a, b;
        for (std::size_t e = 0, n = 1 + rng() % 5; e < n; ++e) {
            EvaluatorTally t{rng() % 9, rng() % 9, rng() % 9};
            if (t.wins + t.ties + t.losses == 0) t.ties = 1;
            a.push_back(t);
            b.push_back({t.losses, t.ties, t.wins});
        }
        EXPECT_NEAR(win_rate(a) + win_rate(b), 1.0, 1e-12);
    }
}

TEST(Properties, NlsSymmetryAndRange) {
    std::mt19937_64 rng(8);
    for (int i = 0; i < 500; ++i) {
        const auto a = metric_suite::random_utf8(rng, 15), b = metric_suite::random_utf8(rng, 15);
        const double x = nls(a, b);
        EXPECT_EQ(x, nls(b, a));
        EXPECT_GE(x, 0.0);
        EXPECT_LE(x, 1.0);
        EXPECT_EQ(nls(a, a), 1.0);
    }
}

TEST(Properties, IouBoundedAndMrrBelowRrr) {
    std::mt19937_64 rng(12);
    for (int i = 0; i < 300; ++i) {
        metric_suite::RandomCorpus corpus(rng);
        const TokenSpace space(corpus.docs);
        std::vector<RetrievalEvalSample> set;
        for (int q = 0; q < 4; ++q) set.push_back(corpus.random_sample(rng, std::to_string(q)));
        for (const auto& s : set) {
            const auto r = sample_token_metrics(s, space, 10);
            ASSERT_TRUE(r.metrics);
            EXPECT_LE(r.metrics->iou, std::min(r.metrics->precision, r.metrics->recall) + 1e-15);
        }
        const double m = mrr_at(set, space, 10), h = ref_retrieved_ratio_at(set, space, 10);
        EXPECT_GE(m, 0.0);
        EXPECT_LE(m, h);
        EXPECT_LE(h, 1.0);
    }
}
