#include "ragkit/mocks.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "ragkit/text_util.hpp"

namespace ragkit::gateway {

using nlohmann::json;

std::string EchoGenerator::generate(const std::string& prompt, const GenerateParams&) { return prompt; }

std::string ConstantGenerator::generate(const std::string&, const GenerateParams&) { return text_; }

std::string FailingGenerator::generate(const std::string&, const GenerateParams& params) {
    throw GatewayError(kind_, "injected " + std::string(to_string(kind_)) + " failure for task '" + params.task + "'");
}

std::string MockRequest::var(const std::string& name) const {
    auto it = params.vars.find(name);
    return it == params.vars.end() ? std::string{} : it->second;
}

// ============================================================================
// ScriptedGenerator
// ============================================================================

ScriptedGenerator& ScriptedGenerator::add(Matcher match, Responder respond, std::optional<std::size_t> uses) {
    std::lock_guard lock(mutex_);
    rules_.push_back({std::move(match), std::move(respond), uses});
    return *this;
}

ScriptedGenerator& ScriptedGenerator::on_task(const std::string& task, const std::string& text) {
    return add(task_is(task), reply(text));
}

ScriptedGenerator& ScriptedGenerator::fail_task(const std::string& task, ErrorKind kind) {
    return add(task_is(task), fail_with(kind));
}

std::string ScriptedGenerator::generate(const std::string& prompt, const GenerateParams& params) {
    Responder respond;
    MockRequest request{prompt, params};
    {
        std::lock_guard lock(mutex_);
        log_.push_back(request);
        for (auto& rule : rules_) {
            if (rule.remaining && *rule.remaining == 0) continue;
            if (!rule.match(request)) continue;
            if (rule.remaining) --*rule.remaining;
            respond = rule.respond;
            break;
        }
    }
    if (!respond) {
        throw GatewayError(ErrorKind::unmatched,
                           "scripted mock has no rule for task '" + params.task + "': " + prompt.substr(0, 120));
    }
    return respond(request);
}

std::vector<MockRequest> ScriptedGenerator::call_log() const {
    std::lock_guard lock(mutex_);
    return log_;
}

ScriptedGenerator::Matcher task_is(std::string task) {
    return [task = std::move(task)](const MockRequest& r) { return r.params.task == task; };
}

ScriptedGenerator::Matcher prompt_contains(std::string needle) {
    return [needle = std::move(needle)](const MockRequest& r) { return r.prompt.find(needle) != std::string::npos; };
}

ScriptedGenerator::Matcher var_equals(std::string name, std::string value) {
    return [name = std::move(name), value = std::move(value)](const MockRequest& r) { return r.var(name) == value; };
}

ScriptedGenerator::Matcher any_request() {
    return [](const MockRequest&) { return true; };
}

ScriptedGenerator::Responder reply(std::string text) {
    return [text = std::move(text)](const MockRequest&) { return text; };
}

ScriptedGenerator::Responder fail_with(ErrorKind kind) {
    return [kind](const MockRequest& r) -> std::string {
        throw GatewayError(kind, "scripted " + std::string(to_string(kind)) + " failure for task '" + r.params.task + "'");
    };
}

// ============================================================================
// Embedders and rerankers
// ============================================================================

namespace {

std::vector<std::string> lower_words(std::string_view text) {
    std::vector<std::string> out;
    for (const auto& span : word_spans(text)) out.push_back(to_lower_ascii(text.substr(span.start, span.size())));
    return out;
}

std::set<std::string> distinct_words(std::string_view text) {
    auto words = lower_words(text);
    return {words.begin(), words.end()};
}

}  // namespace

Embedding HashingEmbedder::embed_one(std::string_view text) const {
    const auto words = lower_words(text);
    if (words.empty()) throw GatewayError(ErrorKind::rejected, "cannot embed empty text");
    std::vector<double> acc(dim_, 0.0);
    auto add = [&](const std::string& feature) {
        const std::uint64_t h = fnv1a64(feature, seed_ ^ 0xcbf29ce484222325ULL);
        const std::size_t slot = static_cast<std::size_t>(h % dim_);
        acc[slot] += (h >> 63) ? -1.0 : 1.0;
    };
    for (std::size_t i = 0; i < words.size(); ++i) {
        add("u:" + words[i]);
        if (i + 1 < words.size()) add("b:" + words[i] + ' ' + words[i + 1]);
    }
    double norm = 0.0;
    for (double v : acc) norm += v * v;
    norm = std::sqrt(norm);
    Embedding out(dim_, 0.0f);
    if (norm > 0.0) {
        for (std::size_t i = 0; i < dim_; ++i) out[i] = static_cast<float>(acc[i] / norm);
    }
    return out;
}

std::vector<Embedding> HashingEmbedder::embed(const std::vector<std::string>& texts) {
    std::vector<Embedding> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(embed_one(t));
    return out;
}

std::vector<Embedding> FailingEmbedder::embed(const std::vector<std::string>&) {
    throw GatewayError(ErrorKind::transport, "injected embed failure");
}

std::vector<double> ConstantReranker::rerank(const std::string&, const std::vector<std::string>& passages) {
    return std::vector<double>(passages.size(), value_);
}

std::vector<double> LexicalOverlapReranker::rerank(const std::string& query, const std::vector<std::string>& passages) {
    const auto q = distinct_words(query);
    std::vector<double> out;
    out.reserve(passages.size());
    for (const auto& p : passages) {
        const auto words = distinct_words(p);
        std::size_t shared = 0;
        for (const auto& w : words) shared += q.count(w);
        out.push_back(static_cast<double>(shared));
    }
    return out;
}

std::vector<double> ScriptedReranker::rerank(const std::string& query, const std::vector<std::string>& passages) {
    return fn_(query, passages);
}

std::vector<double> FailingReranker::rerank(const std::string&, const std::vector<std::string>&) {
    throw GatewayError(ErrorKind::transport, "injected rerank failure");
}

// ============================================================================
// Full mock stack
// ============================================================================

namespace {

std::string first_words(std::string_view text, std::size_t n) {
    const auto spans = word_spans(text);
    std::string out;
    for (std::size_t i = 0; i < spans.size() && i < n; ++i) {
        if (!out.empty()) out.push_back(' ');
        out.append(text.substr(spans[i].start, spans[i].size()));
    }
    return out;
}

std::string last_words(std::string_view text, std::size_t n) {
    const auto spans = word_spans(text);
    std::string out;
    for (std::size_t i = spans.size() > n ? spans.size() - n : 0; i < spans.size(); ++i) {
        if (!out.empty()) out.push_back(' ');
        out.append(text.substr(spans[i].start, spans[i].size()));
    }
    return out;
}

double overlap_ratio(std::string_view answer, std::string_view reference) {
    const auto ref = distinct_words(reference);
    if (ref.empty()) return 0.0;
    const auto ans = distinct_words(answer);
    std::size_t shared = 0;
    for (const auto& w : ref) shared += ans.count(w);
    return static_cast<double>(shared) / static_cast<double>(ref.size());
}

}  // namespace

std::string StackMock::generate(const std::string& prompt, const GenerateParams& params) {
    const MockRequest r{prompt, params};
    const auto& task = params.task;
    if (task == "query_rewrite") return r.var("query");
    if (task == "query_reformulate") return r.var("question");
    if (task == "answer_generate") {
        const auto context = r.var("context");
        if (trim(context).empty()) return "No relevant information was found in the knowledge base.";
        return "According to the retrieved sources: " + first_words(context, 40);
    }
    if (task == "hallucination_detect") return R"({"hallucinated": false, "justification": ""})";
    if (task == "answer_revise") {
        return json{{"revised_answer", r.var("answer")}, {"critique", "No unsupported claims found."}}.dump();
    }
    if (task == "answer_rank") return R"({"preferred": "original"})";
    if (task == "summarize" || task == "summarize_strict") {
        // Keeps the most recent words within the stated budget (tokens ~ 4/3 words).
        std::size_t budget_words = 150;
        try {
            budget_words = std::min<std::size_t>(budget_words, std::stoul(r.var("budget")) * 3 / 4);
        } catch (const std::exception&) {
        }
        return last_words(r.var("summary") + "\n" + first_words(r.var("turn"), 60), budget_words);
    }
    if (task == "judge" || task == "judge_context") return R"({"score": 3, "reason": "mock"})";
    if (task == "pairwise_judge") return R"({"winner": "tie"})";
    if (task == "eval_query_generation") {
        const auto text = r.var("text");
        return json{{"query", "What is said about " + first_words(text, 6) + "?"}, {"excerpt", first_words(text, 25)}}
            .dump();
    }
    return prompt;
}

std::string MockJudgeGenerator::generate(const std::string& prompt, const GenerateParams& params) {
    const MockRequest r{prompt, params};
    if (params.task == "pairwise_judge") {
        const double a = overlap_ratio(r.var("answer_a"), r.var("reference"));
        const double b = overlap_ratio(r.var("answer_b"), r.var("reference"));
        return json{{"winner", a > b ? "A" : (b > a ? "B" : "tie")}}.dump();
    }
    const auto colon = name_.find(':');
    const std::string label = colon == std::string::npos ? name_ : name_.substr(colon + 1);
    if (label.size() == 1 && label[0] >= '0' && label[0] <= '5') return json{{"score", label[0] - '0'}}.dump();
    const double ratio = overlap_ratio(r.var("output"), r.var("reference"));
    return json{{"score", static_cast<int>(std::lround(5.0 * ratio))}}.dump();
}

ModelGateway make_mock_gateway(std::size_t embed_dim) {
    return ModelGateway(std::make_shared<StackMock>(), std::make_shared<HashingEmbedder>(embed_dim),
                        std::make_shared<LexicalOverlapReranker>());
}

}  // namespace ragkit::gateway
