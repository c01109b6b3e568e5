#pragma once

#include <memory>
#include <string>
#include <vector>

#include "ragkit/service.hpp"
#include "helpers.hpp"

namespace testing_util {

// Full offline stack: StackMock generator, hashing embedder, lexical reranker,
// one "earth" knowledge base and a fake clock.
inline std::shared_ptr<ragkit::service::Service> mock_service(std::size_t max_sessions = 16,
                                                             ragkit::gateway::ModelGateway gw =
                                                                 ragkit::gateway::make_mock_gateway()) {
    auto registry = std::make_shared<ragkit::index::KbRegistry>();
    registry->put(hashed_index("earth", earth_texts()));
    ragkit::retrieval::RetrievalConfig rc;
    rc.k = 3;
    auto engine = std::make_shared<ragkit::service::AnswerEngine>(std::move(gw), registry, rc,
                                                                  ragkit::conversation::TokenBudget{},
                                                                  std::make_shared<ragkit::service::FakeClock>(1.0));
    ragkit::config::ServiceOptions options;
    options.max_sessions = max_sessions;
    options.threads = 2;
    return std::make_shared<ragkit::service::Service>(engine, options);
}

inline const std::vector<std::string>& five_turns() {
    static const std::vector<std::string> q{"What resolution does Sentinel-2 provide?",
                                            "How does Landsat compare?",
                                            "Which sensors see through clouds?",
                                            "How is soil moisture measured?",
                                            "Summarize the optical missions."};
    return q;
}

}  // namespace testing_util
