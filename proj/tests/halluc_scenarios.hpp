#pragma once

// Scripted branch combinations for the hallucination state machine, shared by
// the unit tests and the acceptance binary.

#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "ragkit/hallucination.hpp"
#include "ragkit/mocks.hpp"
#include "helpers.hpp"

namespace scenarios {

using namespace ragkit;
using namespace ragkit::gateway;

struct Branch {
    std::string name;
    std::string detect_reply;  // empty = gateway failure
    bool reformulate_fails = false;
    bool revise_fails = false;
    std::string rank_reply;  // empty = gateway failure

    // Expected outcome.
    hallucination::Choice choice;
    bool flagged;
    std::size_t generate_calls;
    std::size_t embed_calls;
    bool full_path;
};

inline void PrintTo(const Branch& b, std::ostream* os) { *os << b.name; }

inline const std::string kQuestion = "What is the revisit time of Landsat 8?";
inline const std::string kAnswer = "Landsat 8 revisits every 3 days.";
inline const std::string kRevised = "Landsat 8 revisits every 16 days.";
inline const std::string kFlag = R"({"hallucinated": true, "justification": "revisit is 16 days"})";

inline std::vector<Branch> branches() {
    using hallucination::Choice;
    return {
        {"grounded", R"({"hallucinated": false, "justification": ""})", false, false, "", Choice::original, false, 1, 0,
         false},
        {"flagged_rank_original", kFlag, false, false, R"({"preferred": "original"})", Choice::original, false, 4, 1,
         true},
        {"flagged_rank_revised", kFlag, false, false, R"({"preferred": "revised"})", Choice::revised, false, 4, 1, true},
        {"flagged_rank_tie", kFlag, false, false, R"({"preferred": "tie"})", Choice::revised, false, 4, 1, true},
        {"flagged_reformulate_fails", kFlag, true, false, R"({"preferred": "revised"})", Choice::revised, true, 4, 1,
         true},
        {"flagged_revise_fails", kFlag, false, true, R"({"preferred": "revised"})", Choice::original, true, 3, 1, true},
        {"flagged_rank_fails", kFlag, false, false, "", Choice::original, true, 4, 1, true},
        {"detector_malformed", "I think it might be wrong?", false, false, R"({"preferred": "revised"})", Choice::revised,
         true, 4, 1, true},
    };
}

struct Harness {
    std::shared_ptr<ScriptedGenerator> gen = std::make_shared<ScriptedGenerator>();
    index::KbRegistry registry;
    std::unique_ptr<ModelGateway> gw;
    std::vector<retrieval::RetrievalCandidate> evidence;

    explicit Harness(const Branch& b) {
        if (b.detect_reply.empty()) gen->fail_task("hallucination_detect");
        else gen->on_task("hallucination_detect", b.detect_reply);
        if (b.reformulate_fails) gen->fail_task("query_reformulate", ErrorKind::timeout);
        else gen->on_task("query_reformulate", "Landsat 8 revisit interval days");
        if (b.revise_fails) gen->fail_task("answer_revise", ErrorKind::http_status);
        else gen->on_task("answer_revise", R"({"revised_answer": ")" + kRevised + R"(", "critique": "3 days is wrong"})");
        if (b.rank_reply.empty()) gen->fail_task("answer_rank", ErrorKind::transport);
        else gen->on_task("answer_rank", b.rank_reply);
        gw = std::make_unique<ModelGateway>(gen, std::make_shared<HashingEmbedder>(256),
                                            std::make_shared<LexicalOverlapReranker>());
        registry.put(testing_util::hashed_index("earth", testing_util::earth_texts()));
        retrieval::RetrievalCandidate prior;
        prior.chunk_id = "prior#0000";
        prior.kb_id = "earth";
        prior.text = "Prior evidence: Landsat missions image the globe.";
        evidence.push_back(prior);
    }

    hallucination::RevisionTrace run() {
        retrieval::RetrievalConfig cfg;
        cfg.k = 2;
        hallucination::Pipeline p(*gw, registry, cfg);
        return p.run(kQuestion, kAnswer, evidence);
    }
};

// Empty string when the trace matches the branch expectation.
inline std::string check(const Branch& b, const hallucination::RevisionTrace& t, const ModelGateway& gw_const) {
    auto& gw = const_cast<ModelGateway&>(gw_const);
    std::string err;
    const std::string want_answer = b.choice == hallucination::Choice::revised ? kRevised : kAnswer;
    if (t.final_choice != b.choice) err += " choice";
    if (t.final_answer != want_answer) err += " answer";
    if (t.flagged() != b.flagged) err += " flagged";
    if (gw.log().count_role("generate") != b.generate_calls)
        err += " generate_calls=" + std::to_string(gw.log().count_role("generate"));
    if (gw.log().count_role("embed") != b.embed_calls) err += " embed_calls=" + std::to_string(gw.log().count_role("embed"));
    if (gw.log().count_role("rerank") != 0) err += " rerank_calls";
    if (!hallucination::is_legal_step_log(t.step_log)) err += " step_log";
    if ((t.step_log.size() == 6) != b.full_path) err += " path";
    if (!b.full_path && (t.reformulated_query || t.revised_answer || t.critique)) err += " grounded_fields";
    return err;
}

}  // namespace scenarios
