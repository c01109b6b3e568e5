#pragma once

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "ragkit/gateway.hpp"

namespace ragkit::gateway {

// Deterministic, network-free implementations of every role.

class EchoGenerator : public TextGenerator {
public:
    std::string generate(const std::string& prompt, const GenerateParams& params) override;
};

class ConstantGenerator : public TextGenerator {
public:
    explicit ConstantGenerator(std::string text) : text_(std::move(text)) {}
    std::string generate(const std::string& prompt, const GenerateParams& params) override;

private:
    std::string text_;
};

class FailingGenerator : public TextGenerator {
public:
    explicit FailingGenerator(ErrorKind kind = ErrorKind::transport) : kind_(kind) {}
    std::string generate(const std::string& prompt, const GenerateParams& params) override;

private:
    ErrorKind kind_;
};

struct MockRequest {
    std::string prompt;
    GenerateParams params;

    std::string var(const std::string& name) const;
};

// Ordered (matcher, responder) rules. The first matching rule with uses left
// answers; an unmatched request throws GatewayError(unmatched).
class ScriptedGenerator : public TextGenerator {
public:
    using Matcher = std::function<bool(const MockRequest&)>;
    using Responder = std::function<std::string(const MockRequest&)>;

    ScriptedGenerator& add(Matcher match, Responder respond, std::optional<std::size_t> uses = std::nullopt);
    ScriptedGenerator& on_task(const std::string& task, const std::string& reply);
    ScriptedGenerator& fail_task(const std::string& task, ErrorKind kind = ErrorKind::transport);

    std::string generate(const std::string& prompt, const GenerateParams& params) override;

    std::vector<MockRequest> call_log() const;

private:
    struct Rule {
        Matcher match;
        Responder respond;
        std::optional<std::size_t> remaining;
    };
    mutable std::mutex mutex_;
    std::vector<Rule> rules_;
    std::vector<MockRequest> log_;
};

ScriptedGenerator::Matcher task_is(std::string task);
ScriptedGenerator::Matcher prompt_contains(std::string needle);
ScriptedGenerator::Matcher var_equals(std::string name, std::string value);
ScriptedGenerator::Matcher any_request();
ScriptedGenerator::Responder reply(std::string text);
ScriptedGenerator::Responder fail_with(ErrorKind kind);

// Signed feature hashing over lowercase word unigrams and bigrams, L2
// normalized. Rejects empty or whitespace-only text.
class HashingEmbedder : public Embedder {
public:
    explicit HashingEmbedder(std::size_t dim = 256, std::uint64_t seed = 0) : dim_(dim), seed_(seed) {}
    std::vector<Embedding> embed(const std::vector<std::string>& texts) override;
    Embedding embed_one(std::string_view text) const;
    std::size_t dim() const { return dim_; }

private:
    std::size_t dim_;
    std::uint64_t seed_;
};

class FailingEmbedder : public Embedder {
public:
    std::vector<Embedding> embed(const std::vector<std::string>& texts) override;
};

class ConstantReranker : public Reranker {
public:
    explicit ConstantReranker(double value = 0.0) : value_(value) {}
    std::vector<double> rerank(const std::string& query, const std::vector<std::string>& passages) override;

private:
    double value_;
};

// Score = number of distinct lowercase words shared with the query.
class LexicalOverlapReranker : public Reranker {
public:
    std::vector<double> rerank(const std::string& query, const std::vector<std::string>& passages) override;
};

class ScriptedReranker : public Reranker {
public:
    using Fn = std::function<std::vector<double>(const std::string&, const std::vector<std::string>&)>;
    explicit ScriptedReranker(Fn fn) : fn_(std::move(fn)) {}
    std::vector<double> rerank(const std::string& query, const std::vector<std::string>& passages) override;

private:
    Fn fn_;
};

class FailingReranker : public Reranker {
public:
    std::vector<double> rerank(const std::string& query, const std::vector<std::string>& passages) override;
};

// Generator for the full offline stack: routes on the prompt id and answers
// each pipeline task with a deterministic, well-formed response.
class StackMock : public TextGenerator {
public:
    std::string generate(const std::string& prompt, const GenerateParams& params) override;
};

// Judge mock: "mock:<digit>" always returns that score; any other name scores
// the lexical overlap of answer and reference on the 0..5 scale.
class MockJudgeGenerator : public TextGenerator {
public:
    explicit MockJudgeGenerator(std::string name) : name_(std::move(name)) {}
    std::string generate(const std::string& prompt, const GenerateParams& params) override;

private:
    std::string name_;
};

ModelGateway make_mock_gateway(std::size_t embed_dim = 256);

}  // namespace ragkit::gateway
