#include "ragkit/hallucination.hpp"

#include <algorithm>

#include "ragkit/text_util.hpp"

namespace ragkit::hallucination {

using nlohmann::json;

std::string_view to_string(Label l) { return l == Label::grounded ? "grounded" : "hallucinated"; }
std::string_view to_string(Choice c) { return c == Choice::original ? "original" : "revised"; }

bool is_legal_step_log(const std::vector<std::string>& steps) {
    static const std::vector<std::string> short_path{kDetect, kEnd};
    static const std::vector<std::string> full_path{kDetect, kReformulate, kRetrieve, kRevise, kRank, kEnd};
    return steps == short_path || steps == full_path;
}

json to_json(const RevisionTrace& t) {
    json j{{"question", t.question},
           {"original_answer", t.original_answer},
           {"verdict",
            {{"label", to_string(t.verdict.label)},
             {"justification", t.verdict.justification},
             {"parse_failure", t.verdict.parse_failure}}},
           {"final_choice", to_string(t.final_choice)},
           {"final_answer", t.final_answer},
           {"step_log", t.step_log},
           {"flags", t.flags}};
    if (t.reformulated_query) j["reformulated_query"] = *t.reformulated_query;
    if (t.new_candidates) {
        json c = json::array();
        for (const auto& cand : *t.new_candidates) c.push_back(retrieval::to_json(cand));
        j["new_candidates"] = c;
    }
    if (t.revised_answer) j["revised_answer"] = *t.revised_answer;
    if (t.critique) j["critique"] = *t.critique;
    return j;
}

std::string format_evidence(const std::vector<retrieval::RetrievalCandidate>& evidence) {
    std::string out;
    for (std::size_t i = 0; i < evidence.size(); ++i) {
        if (i) out += "\n\n";
        out += "[" + std::to_string(i + 1) + "] (" + evidence[i].kb_id + ":" + evidence[i].chunk_id + ") " +
               evidence[i].text;
    }
    return out;
}

// ============================================================================
// Parsing
// ============================================================================

std::optional<Verdict> parse_verdict(std::string_view response) {
    const auto obj = gateway::extract_json_object(response);
    if (!obj) return std::nullopt;
    const auto it = obj->find("hallucinated");
    if (it == obj->end() || !it->is_boolean()) return std::nullopt;
    Verdict v;
    v.label = it->get<bool>() ? Label::hallucinated : Label::grounded;
    const auto jt = obj->find("justification");
    if (jt != obj->end() && jt->is_string()) v.justification = std::string(trim(jt->get<std::string>()));
    if (v.label == Label::hallucinated && v.justification.empty()) v.justification = "unspecified";
    if (v.label == Label::grounded) v.justification.clear();
    return v;
}

std::optional<Preference> parse_preference(std::string_view response) {
    std::string token;
    if (const auto obj = gateway::extract_json_object(response)) {
        const auto it = obj->find("preferred");
        if (it == obj->end() || !it->is_string()) return std::nullopt;
        token = it->get<std::string>();
    } else {
        token = std::string(response);
    }
    const std::string t = to_lower_ascii(trim(token));
    if (t == "original") return Preference::original;
    if (t == "revised") return Preference::revised;
    if (t == "tie") return Preference::tie;
    return std::nullopt;
}

Verdict detect(gateway::ModelGateway& gw, const std::string& question, const std::string& answer,
               const std::string& evidence) {
    Verdict failure{Label::hallucinated, "parse-failure", true};
    std::string response;
    try {
        response = gw.generate("hallucination_detect",
                               {{"question", question}, {"answer", answer}, {"evidence", evidence}});
    } catch (const gateway::GatewayError&) {
        return failure;
    }
    auto v = parse_verdict(response);
    return v ? *v : failure;
}

// ============================================================================
// State machine
// ============================================================================

RevisionTrace Pipeline::run(const std::string& question, const std::string& answer,
                            const std::vector<retrieval::RetrievalCandidate>& evidence) {
    RevisionTrace t;
    t.question = question;
    t.original_answer = answer;
    t.final_answer = answer;
    const std::string prior = format_evidence(evidence);

    t.step_log.push_back(kDetect);
    t.verdict = detect(gw_, question, answer, prior);
    if (t.verdict.parse_failure) t.flags.push_back("detect: unusable detector output, treated as hallucinated");
    if (t.verdict.label == Label::grounded) {
        t.step_log.push_back(kEnd);
        return t;
    }

    t.step_log.push_back(kReformulate);
    std::string new_query = question;
    try {
        const auto text = std::string(trim(gw_.generate(
            "query_reformulate", {{"question", question}, {"justification", t.verdict.justification}})));
        if (text.empty()) t.flags.push_back("reformulate: empty response, original question reused");
        else new_query = text;
    } catch (const gateway::GatewayError& e) {
        t.flags.push_back(std::string("reformulate: ") + e.what() + "; original question reused");
    }
    t.reformulated_query = new_query;

    // Same retrieval config as the original query; embedding order only.
    t.step_log.push_back(kRetrieve);
    std::vector<retrieval::RetrievalCandidate> fresh;
    try {
        auto found = retrieval::retrieve(gw_, registry_, new_query, config_);
        fresh = std::move(found.pool);
        std::sort(fresh.begin(), fresh.end(), [](const auto& a, const auto& b) {
            if (a.embed_score != b.embed_score) return a.embed_score > b.embed_score;
            if (a.chunk_id != b.chunk_id) return a.chunk_id < b.chunk_id;
            return a.kb_id < b.kb_id;
        });
        if (fresh.size() > config_.k) fresh.resize(config_.k);
        for (std::size_t i = 0; i < fresh.size(); ++i) fresh[i].rank = i + 1;
    } catch (const std::exception& e) {
        t.flags.push_back(std::string("retrieve: ") + e.what() + "; revising with prior evidence only");
    }
    t.new_candidates = fresh;
    const std::string fresh_text = format_evidence(fresh);

    t.step_log.push_back(kRevise);
    try {
        const auto response = gw_.generate(
            "answer_revise",
            {{"question", question}, {"answer", answer}, {"prior_evidence", prior}, {"new_evidence", fresh_text}});
        if (const auto obj = gateway::extract_json_object(response)) {
            const auto it = obj->find("revised_answer");
            if (it != obj->end() && it->is_string() && !trim(it->get<std::string>()).empty()) {
                t.revised_answer = it->get<std::string>();
                const auto ct = obj->find("critique");
                t.critique = ct != obj->end() && ct->is_string() ? ct->get<std::string>() : std::string{};
            }
        } else if (!trim(response).empty()) {
            t.revised_answer = std::string(trim(response));
            t.critique = std::string{};
        }
        if (!t.revised_answer) t.flags.push_back("revise: unusable response, original kept by forfeit");
    } catch (const gateway::GatewayError& e) {
        t.flags.push_back(std::string("revise: ") + e.what() + "; original kept by forfeit");
    }

    t.step_log.push_back(kRank);
    if (t.revised_answer) {
        try {
            const auto response = gw_.generate("answer_rank", {{"question", question},
                                                               {"original", answer},
                                                               {"revised", *t.revised_answer},
                                                               {"critique", *t.critique},
                                                               {"evidence", fresh_text.empty() ? prior
                                                                            : prior.empty() ? fresh_text
                                                                                            : prior + "\n\n" + fresh_text}});
            const auto pref = parse_preference(response);
            if (!pref) {
                t.flags.push_back("rank: unparsable ranking, original kept");
            } else if (*pref != Preference::original) {
                t.final_choice = Choice::revised;  // ties go to the evidence-driven revision
                t.final_answer = *t.revised_answer;
            }
        } catch (const gateway::GatewayError& e) {
            t.flags.push_back(std::string("rank: ") + e.what() + "; original kept");
        }
    }
    t.step_log.push_back(kEnd);
    return t;
}

}  // namespace ragkit::hallucination
