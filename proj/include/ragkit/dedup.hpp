#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ragkit/corpus.hpp"
#include "ragkit/text_util.hpp"

namespace ragkit::corpus {

struct ExactDuplicateGroup {
    std::string digest;            // lowercase hex
    std::vector<std::string> ids;  // in input order
    std::string kept;              // first id of the group
};

// A paragraph of one document.
struct SpanRef {
    std::string doc_id;
    std::size_t segment = 0;
    ByteSpan span;
};

struct NearDuplicatePair {
    SpanRef a;
    SpanRef b;
    double estimated_jaccard = 0.0;
};

struct MinHashConfig {
    std::size_t shingle_size = 3;  // words
    std::size_t num_perms = 256;
    std::size_t lsh_bands = 32;
    double threshold = 0.8;
    std::uint64_t seed = 0x5eedULL;

    // Throws std::invalid_argument when num_perms is not a multiple of lsh_bands.
    void validate() const;
    static MinHashConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

struct DedupReport {
    std::string digest_algorithm = "sha256";
    std::vector<ExactDuplicateGroup> exact_duplicate_groups;
    std::vector<NearDuplicatePair> near_duplicate_pairs;
    nlohmann::json minhash_config;  // null unless near-dup detection ran

    nlohmann::json to_json() const;
};

std::string sha256_hex(std::string_view bytes);

struct TextRef {
    std::string_view id;
    std::string_view text;
};

// Groups documents whose text bytes hash identically. Only groups of two or
// more are reported.
DedupReport exact_dedup(std::span<const TextRef> docs);
DedupReport exact_dedup(std::span<const RawDocument> docs);

// Ids that survive exact dedup, in input order.
std::vector<std::string> kept_ids(std::span<const TextRef> docs, const DedupReport& report);

// 64-bit hashes of lowercase word k-shingles. Texts with fewer than k words
// yield one shingle made of all words; empty texts yield nothing.
std::vector<std::uint64_t> word_shingle_hashes(std::string_view text, std::size_t k);

class MinHasher {
public:
    MinHasher(std::size_t num_perms, std::uint64_t seed);

    // One minimum per permutation over (a*x + b) mod (2^61 - 1).
    std::vector<std::uint64_t> signature(std::span<const std::uint64_t> shingle_hashes) const;

    std::size_t num_perms() const { return a_.size(); }

    // Fraction of agreeing signature positions.
    static double estimate(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b);

private:
    std::vector<std::uint64_t> a_;
    std::vector<std::uint64_t> b_;
};

// Paragraph segments (split at blank lines), trimmed.
std::vector<ByteSpan> paragraph_segments(std::string_view text);

// Near-duplicate paragraphs within and across documents via LSH banding.
DedupReport minhash_near_dup(std::span<const TextRef> docs, const MinHashConfig& config = {});

}  // namespace ragkit::corpus
