#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace ragkit::index {

using Embedding = std::vector<float>;
using Metadata = std::map<std::string, std::string>;

// One bit per dimension, packed little-endian into 64-bit words.
struct BinaryCode {
    std::size_t dim = 0;
    std::vector<std::uint64_t> words;

    bool bit(std::size_t i) const { return (words[i / 64] >> (i % 64)) & 1U; }
    bool operator==(const BinaryCode&) const = default;
};

// Sign quantization: bit i is set iff values[i] >= 0. Rejects NaN/inf.
BinaryCode binarize(std::span<const float> values);

std::size_t hamming_distance(const BinaryCode& a, const BinaryCode& b);

// A conjunction of "key is one of {values}" predicates. A predicate on a key
// the entry lacks evaluates to false.
struct FilterExpr {
    struct Predicate {
        std::string key;
        std::set<std::string> values;
    };
    std::vector<Predicate> predicates;

    bool empty() const { return predicates.empty(); }

    // "source=kb-A;year=2020|2021"
    static FilterExpr parse(std::string_view expr);
    // {"source": "kb-A", "year": ["2020", "2021"]}
    static FilterExpr from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

bool metadata_filter(const Metadata& metadata, const FilterExpr& filter);

struct IndexEntry {
    std::string chunk_id;
    std::string doc_id;
    std::string text;
    Embedding embedding;
    BinaryCode code;
    Metadata metadata;
    std::string kb_id;
    std::size_t start = 0;  // byte range of the chunk in its document
    std::size_t end = 0;
};

struct Candidate {
    const IndexEntry* entry = nullptr;
    std::size_t hamming = 0;
};

struct ScoredCandidate {
    const IndexEntry* entry = nullptr;
    std::size_t hamming = 0;
    double score = 0.0;
};

enum class Similarity { cosine, dot };

Similarity similarity_from_string(std::string_view name);
std::string_view to_string(Similarity s);

// Cosine of two vectors, 0 when either has zero norm.
double cosine_similarity(std::span<const float> a, std::span<const float> b);
double dot_product(std::span<const float> a, std::span<const float> b);

class UnknownKbError : public std::runtime_error {
public:
    explicit UnknownKbError(const std::string& kb_id) : std::runtime_error("unknown knowledge base '" + kb_id + "'") {}
};

// Immutable once built; safe for concurrent readers.
class VectorIndex {
public:
    static constexpr std::uint32_t kFormatVersion = 1;
    static constexpr std::uint32_t kSchemeSignBit = 1;

    VectorIndex(std::string kb_id, std::size_t dim, std::vector<IndexEntry> entries);

    const std::string& kb_id() const { return kb_id_; }
    std::size_t dim() const { return dim_; }
    std::size_t size() const { return entries_.size(); }
    const std::vector<IndexEntry>& entries() const { return entries_; }
    const IndexEntry* find(std::string_view chunk_id) const;

    // The n entries passing `filter` closest to `query` in Hamming distance,
    // ties broken by ascending chunk_id.
    std::vector<Candidate> hamming_top_n(const BinaryCode& query, const FilterExpr& filter, std::size_t n) const;

    // Writes <dir>/<kb_id>.idx and the <dir>/<kb_id>.meta.jsonl sidecar.
    void save(const std::filesystem::path& dir) const;
    static std::shared_ptr<const VectorIndex> load(const std::filesystem::path& idx_file);

    static std::filesystem::path index_path(const std::filesystem::path& dir, std::string_view kb_id);

private:
    std::string kb_id_;
    std::size_t dim_;
    std::vector<IndexEntry> entries_;
};

// Reorders candidates by descending similarity to `query`, ties by chunk_id.
// Zero-norm vectors score 0 and append a warning.
std::vector<ScoredCandidate> rescore(std::span<const float> query, const std::vector<Candidate>& candidates,
                                     Similarity similarity = Similarity::cosine,
                                     std::vector<std::string>* warnings = nullptr);

// kb_id -> index. Replacing an index swaps the pointer; readers holding the
// old shared_ptr keep a consistent view.
class KbRegistry {
public:
    void put(std::shared_ptr<const VectorIndex> index);
    std::shared_ptr<const VectorIndex> get(const std::string& kb_id) const;  // throws UnknownKbError
    bool contains(const std::string& kb_id) const;
    std::vector<std::string> ids() const;

    // Loads every *.idx file found in `dir`.
    void load_dir(const std::filesystem::path& dir);

private:
    mutable std::mutex mutex_;
    std::map<std::string, std::shared_ptr<const VectorIndex>> indexes_;
};

}  // namespace ragkit::index
