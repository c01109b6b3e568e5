#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ragkit/gateway.hpp"
#include "ragkit/retrieval.hpp"

namespace ragkit::hallucination {

enum class Label { grounded, hallucinated };
enum class Choice { original, revised };

std::string_view to_string(Label l);
std::string_view to_string(Choice c);

struct Verdict {
    Label label = Label::grounded;
    std::string justification;  // non-empty when hallucinated
    bool parse_failure = false;
};

// Steps of the fixed transition graph
// detect -> {end | reformulate -> retrieve -> revise -> rank -> end}.
inline constexpr const char* kDetect = "detect";
inline constexpr const char* kReformulate = "reformulate";
inline constexpr const char* kRetrieve = "retrieve";
inline constexpr const char* kRevise = "revise";
inline constexpr const char* kRank = "rank";
inline constexpr const char* kEnd = "end";

bool is_legal_step_log(const std::vector<std::string>& steps);

struct RevisionTrace {
    std::string question;
    std::string original_answer;
    Verdict verdict;
    std::optional<std::string> reformulated_query;
    std::optional<std::vector<retrieval::RetrievalCandidate>> new_candidates;
    std::optional<std::string> revised_answer;
    std::optional<std::string> critique;
    Choice final_choice = Choice::original;
    std::string final_answer;
    std::vector<std::string> step_log;
    std::vector<std::string> flags;  // one entry per degraded step

    bool flagged() const { return !flags.empty(); }
};

nlohmann::json to_json(const RevisionTrace& t);

// Renders evidence passages as a numbered list for prompts.
std::string format_evidence(const std::vector<retrieval::RetrievalCandidate>& evidence);

// Unparsable output or gateway failure -> hallucinated with justification
// "parse-failure", parse_failure set.
Verdict detect(gateway::ModelGateway& gw, const std::string& question, const std::string& answer,
               const std::string& evidence);

// Parses {"hallucinated": bool, "justification": str}.
std::optional<Verdict> parse_verdict(std::string_view response);

enum class Preference { original, revised, tie };
std::optional<Preference> parse_preference(std::string_view response);

class Pipeline {
public:
    Pipeline(gateway::ModelGateway& gw, const index::KbRegistry& registry, retrieval::RetrievalConfig config)
        : gw_(gw), registry_(registry), config_(std::move(config)) {}

    // Runs the state machine; never throws for gateway failures and always
    // returns an answer.
    RevisionTrace run(const std::string& question, const std::string& answer,
                      const std::vector<retrieval::RetrievalCandidate>& evidence);

private:
    gateway::ModelGateway& gw_;
    const index::KbRegistry& registry_;
    retrieval::RetrievalConfig config_;
};

}  // namespace ragkit::hallucination
