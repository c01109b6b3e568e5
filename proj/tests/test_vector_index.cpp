#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <limits>
#include <random>

#include "ragkit/vector_index.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace ragkit::index;

namespace {

IndexEntry entry(const std::string& id, Embedding v, Metadata meta = {}) {
    IndexEntry e;
    e.chunk_id = id;
    e.doc_id = "doc";
    e.text = "text of " + id;
    e.embedding = std::move(v);
    e.metadata = std::move(meta);
    return e;
}

Embedding bits8(const std::string& b) {
    Embedding v;
    for (char c : b) v.push_back(c == '1' ? 1.0f : -1.0f);
    return v;
}

}  // namespace

TEST(Binarize, SignConvention) {
    const auto c = binarize(Embedding{0.3f, -0.2f, 0.0f});
    EXPECT_TRUE(c.bit(0));
    EXPECT_FALSE(c.bit(1));
    EXPECT_TRUE(c.bit(2));
    EXPECT_EQ(c.dim, 3u);
}

TEST(Binarize, AllPositiveIsAllOnes) {
    const auto c = binarize(Embedding(70, 0.5f));
    for (std::size_t i = 0; i < 70; ++i) EXPECT_TRUE(c.bit(i));
}

TEST(Binarize, NegationComplementsCode) {
    std::mt19937 rng(1);
    std::normal_distribution<float> n;
    Embedding v(100), w(100);
    for (std::size_t i = 0; i < v.size(); ++i) {
        v[i] = n(rng);
        if (v[i] == 0.0f) v[i] = 1.0f;
        w[i] = -v[i];
    }
    EXPECT_EQ(hamming_distance(binarize(v), binarize(w)), 100u);
}

TEST(Binarize, RejectsNonFinite) {
    EXPECT_THROW(binarize(Embedding{1.0f, std::numeric_limits<float>::quiet_NaN()}), std::invalid_argument);
    EXPECT_THROW(binarize(Embedding{std::numeric_limits<float>::infinity()}), std::invalid_argument);
}

TEST(HammingTopN, ExactMatchFirst) {
    VectorIndex idx("kb", 8, {entry("a", bits8("00000000")), entry("b", bits8("11111111"))});
    const auto r = idx.hamming_top_n(binarize(bits8("11111111")), {}, 1);
    ASSERT_EQ(r.size(), 1u);
    EXPECT_EQ(r[0].entry->chunk_id, "b");
    EXPECT_EQ(r[0].hamming, 0u);
}

TEST(HammingTopN, ToyCorpusByHand) {
    VectorIndex idx("kb", 8,
                    {entry("z", bits8("00000000")), entry("o", bits8("11111111")), entry("h", bits8("00001111"))});
    const auto q = binarize(bits8("00000011"));
    const auto r = idx.hamming_top_n(q, {}, 2);
    ASSERT_EQ(r.size(), 2u);
    EXPECT_EQ(r[0].hamming, 2u);
    EXPECT_EQ(r[1].hamming, 2u);
    EXPECT_EQ(r[0].entry->chunk_id, "h");
    EXPECT_EQ(r[1].entry->chunk_id, "z");
    const auto all = idx.hamming_top_n(q, {}, 100);
    ASSERT_EQ(all.size(), 3u);
    EXPECT_EQ(all[2].hamming, 6u);
}

TEST(HammingTopN, Preconditions) {
    VectorIndex idx("kb", 8, {entry("a", bits8("00000000"))});
    EXPECT_THROW(idx.hamming_top_n(binarize(bits8("0000")), {}, 1), std::invalid_argument);
    EXPECT_THROW(idx.hamming_top_n(binarize(bits8("00000000")), {}, 0), std::invalid_argument);
}

TEST(Rescore, CosineOrdering) {
    VectorIndex idx("kb", 2, {entry("x", {1, 1}), entry("y", {0, 1}), entry("same", {1, 0})});
    const Embedding q{1, 0};
    const auto r = rescore(q, idx.hamming_top_n(binarize(q), {}, 3));
    ASSERT_EQ(r.size(), 3u);
    EXPECT_EQ(r[0].entry->chunk_id, "same");
    EXPECT_DOUBLE_EQ(r[0].score, 1.0);
    EXPECT_NEAR(r[1].score, std::sqrt(0.5), 1e-12);
    EXPECT_DOUBLE_EQ(r[2].score, 0.0);
}

TEST(Rescore, ZeroNormWarns) {
    VectorIndex idx("kb", 2, {entry("zero", {0, 0}), entry("one", {1, 0})});
    std::vector<std::string> warnings;
    const Embedding q{1, 0};
    const auto r = rescore(q, idx.hamming_top_n(binarize(q), {}, 2), Similarity::cosine, &warnings);
    EXPECT_EQ(r.back().entry->chunk_id, "zero");
    EXPECT_EQ(r.back().score, 0.0);
    EXPECT_EQ(warnings.size(), 1u);
}

TEST(Rescore, DotProductOption) {
    VectorIndex idx("kb", 2, {entry("long", {3, 0}), entry("unit", {1, 0})});
    const Embedding q{1, 0};
    const auto r = rescore(q, idx.hamming_top_n(binarize(q), {}, 2), Similarity::dot);
    EXPECT_EQ(r[0].entry->chunk_id, "long");
    EXPECT_DOUBLE_EQ(r[0].score, 3.0);
}

TEST(Filter, Semantics) {
    EXPECT_TRUE(metadata_filter({{"a", "b"}}, {}));
    EXPECT_FALSE(metadata_filter({{"source", "kb-B"}}, FilterExpr::parse("source=kb-A")));
    EXPECT_TRUE(metadata_filter({{"year", "2021"}}, FilterExpr::parse("year=2020|2021")));
    EXPECT_FALSE(metadata_filter({}, FilterExpr::parse("year=2021")));
    EXPECT_FALSE(metadata_filter({{"year", "2021"}, {"source", "x"}}, FilterExpr::parse("year=2021;source=y")));
}

TEST(Filter, JsonForms) {
    const auto f = FilterExpr::from_json(nlohmann::json{{"source", "kb-A"}, {"year", {"2020", "2021"}}});
    EXPECT_EQ(f.predicates.size(), 2u);
    EXPECT_TRUE(FilterExpr::from_json(nullptr).empty());
    EXPECT_EQ(FilterExpr::from_json(f.to_json()).to_json(), f.to_json());
    EXPECT_THROW(FilterExpr::parse("noequals"), std::invalid_argument);
}

TEST(Filter, AppliedBeforeTopN) {
    VectorIndex idx("kb", 2, {entry("a", {1, 0}, {{"y", "1"}}), entry("b", {1, 0}, {{"y", "2"}})});
    const auto r = idx.hamming_top_n(binarize(Embedding{1, 0}), FilterExpr::parse("y=2"), 5);
    ASSERT_EQ(r.size(), 1u);
    EXPECT_EQ(r[0].entry->chunk_id, "b");
}

TEST(Index, RejectsDuplicateIdsAndBadDims) {
    EXPECT_THROW(VectorIndex("kb", 2, {entry("a", {1, 0}), entry("a", {0, 1})}), std::invalid_argument);
    EXPECT_THROW(VectorIndex("kb", 3, {entry("a", {1, 0})}), std::invalid_argument);
}

TEST(Index, SaveLoadRoundTrip) {
    testing_util::TempDir dir("idx");
    const auto idx = testing_util::hashed_index("earth", testing_util::earth_texts(), 64);
    idx->save(dir.path());
    const auto path = VectorIndex::index_path(dir.path(), "earth");
    ASSERT_TRUE(std::filesystem::exists(path));
    const auto back = VectorIndex::load(path);
    EXPECT_EQ(back->kb_id(), "earth");
    EXPECT_EQ(back->dim(), 64u);
    ASSERT_EQ(back->size(), idx->size());
    for (std::size_t i = 0; i < idx->size(); ++i) {
        EXPECT_EQ(back->entries()[i].chunk_id, idx->entries()[i].chunk_id);
        EXPECT_EQ(back->entries()[i].embedding, idx->entries()[i].embedding);
        EXPECT_EQ(back->entries()[i].code, idx->entries()[i].code);
        EXPECT_EQ(back->entries()[i].metadata, idx->entries()[i].metadata);
        EXPECT_EQ(back->entries()[i].text, idx->entries()[i].text);
    }
}

TEST(Index, LoadRejectsCorruptFile) {
    testing_util::TempDir dir("idxbad");
    const auto path = dir.file("bad.idx");
    std::ofstream(path) << "not an index";
    EXPECT_THROW(VectorIndex::load(path), std::runtime_error);
}

TEST(Registry, LoadDirAndUnknownKb) {
    testing_util::TempDir dir("reg");
    testing_util::hashed_index("a", {"alpha text"}, 32)->save(dir.path());
    testing_util::hashed_index("b", {"beta text"}, 32)->save(dir.path());
    KbRegistry reg;
    reg.load_dir(dir.path());
    EXPECT_EQ(reg.ids(), (std::vector<std::string>{"a", "b"}));
    EXPECT_TRUE(reg.contains("a"));
    EXPECT_THROW(reg.get("missing"), UnknownKbError);
}

TEST(Properties, FullScanRescoreEqualsExhaustiveCosine) {
    std::mt19937 rng(9);
    std::normal_distribution<float> n;
    for (int trial = 0; trial < 5; ++trial) {
        const std::size_t dim = 16 + rng() % 64, count = 50 + rng() % 300;
        std::vector<IndexEntry> es;
        for (std::size_t i = 0; i < count; ++i) {
            Embedding v(dim);
            for (auto& x : v) x = n(rng);
            es.push_back(entry("c" + std::to_string(i), v));
        }
        VectorIndex idx("kb", dim, es);
        Embedding q(dim);
        for (auto& x : q) x = n(rng);
        const auto got = rescore(q, idx.hamming_top_n(binarize(q), {}, count));
        std::vector<std::pair<double, std::string>> want;
        for (const auto& e : es) want.emplace_back(-oracle::cosine(q, e.embedding), e.chunk_id);
        std::sort(want.begin(), want.end());
        ASSERT_EQ(got.size(), want.size());
        for (std::size_t i = 0; i < got.size(); ++i) EXPECT_EQ(got[i].entry->chunk_id, want[i].second);
    }
}
