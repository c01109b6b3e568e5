#include "ragkit/vector_index.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "ragkit/json_lines.hpp"
#include "ragkit/text_util.hpp"

namespace ragkit::index {

using nlohmann::json;

BinaryCode binarize(std::span<const float> values) {
    BinaryCode code;
    code.dim = values.size();
    code.words.assign((values.size() + 63) / 64, 0);
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!std::isfinite(values[i])) {
            throw std::invalid_argument("binarize: non-finite value at dimension " + std::to_string(i));
        }
        if (values[i] >= 0.0f) code.words[i / 64] |= std::uint64_t{1} << (i % 64);
    }
    return code;
}

std::size_t hamming_distance(const BinaryCode& a, const BinaryCode& b) {
    if (a.dim != b.dim) throw std::invalid_argument("hamming_distance: code lengths differ");
    std::size_t d = 0;
    for (std::size_t i = 0; i < a.words.size(); ++i) d += static_cast<std::size_t>(std::popcount(a.words[i] ^ b.words[i]));
    return d;
}

// ============================================================================
// Metadata filter
// ============================================================================

FilterExpr FilterExpr::parse(std::string_view expr) {
    FilterExpr f;
    for (const auto& raw : split(expr, ';')) {
        const auto clause = trim(raw);
        if (clause.empty()) continue;
        const auto eq = clause.find('=');
        if (eq == std::string_view::npos) {
            throw std::invalid_argument("filter clause '" + std::string(clause) + "' lacks '='");
        }
        Predicate p;
        p.key = std::string(trim(clause.substr(0, eq)));
        if (p.key.empty()) throw std::invalid_argument("filter clause '" + std::string(clause) + "' has an empty key");
        for (const auto& v : split(clause.substr(eq + 1), '|')) p.values.insert(std::string(trim(v)));
        f.predicates.push_back(std::move(p));
    }
    return f;
}

FilterExpr FilterExpr::from_json(const json& j) {
    FilterExpr f;
    if (j.is_null()) return f;
    if (j.is_string()) return parse(j.get<std::string>());
    if (!j.is_object()) throw std::invalid_argument("filter must be an object or a string");
    for (const auto& [key, value] : j.items()) {
        Predicate p;
        p.key = key;
        auto as_string = [](const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); };
        if (value.is_array()) {
            for (const auto& v : value) p.values.insert(as_string(v));
        } else {
            p.values.insert(as_string(value));
        }
        f.predicates.push_back(std::move(p));
    }
    return f;
}

json FilterExpr::to_json() const {
    json j = json::object();
    for (const auto& p : predicates) j[p.key] = p.values;
    return j;
}

bool metadata_filter(const Metadata& metadata, const FilterExpr& filter) {
    for (const auto& p : filter.predicates) {
        auto it = metadata.find(p.key);
        if (it == metadata.end() || !p.values.count(it->second)) return false;
    }
    return true;
}

// ============================================================================
// Similarity
// ============================================================================

Similarity similarity_from_string(std::string_view name) {
    if (name == "cosine") return Similarity::cosine;
    if (name == "dot") return Similarity::dot;
    throw std::invalid_argument("unknown similarity '" + std::string(name) + "'");
}

std::string_view to_string(Similarity s) { return s == Similarity::cosine ? "cosine" : "dot"; }

double dot_product(std::span<const float> a, std::span<const float> b) {
    if (a.size() != b.size()) throw std::invalid_argument("dot_product: dimension mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    return acc;
}

double cosine_similarity(std::span<const float> a, std::span<const float> b) {
    const double na = std::sqrt(dot_product(a, a));
    const double nb = std::sqrt(dot_product(b, b));
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot_product(a, b) / (na * nb);
}

std::vector<ScoredCandidate> rescore(std::span<const float> query, const std::vector<Candidate>& candidates,
                                     Similarity similarity, std::vector<std::string>* warnings) {
    const bool zero_query = dot_product(query, query) == 0.0;
    if (zero_query && warnings && similarity == Similarity::cosine) {
        warnings->push_back("query embedding has zero norm; cosine scores set to 0");
    }
    std::vector<ScoredCandidate> out;
    out.reserve(candidates.size());
    for (const auto& c : candidates) {
        const auto& emb = c.entry->embedding;
        double score = 0.0;
        if (similarity == Similarity::dot) {
            score = dot_product(query, emb);
        } else {
            score = cosine_similarity(query, emb);
            if (!zero_query && warnings && dot_product(emb, emb) == 0.0) {
                warnings->push_back("chunk " + c.entry->chunk_id + " has a zero-norm embedding; score set to 0");
            }
        }
        out.push_back({c.entry, c.hamming, score});
    }
    std::sort(out.begin(), out.end(), [](const ScoredCandidate& a, const ScoredCandidate& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.entry->chunk_id < b.entry->chunk_id;
    });
    return out;
}

// ============================================================================
// VectorIndex
// ============================================================================

VectorIndex::VectorIndex(std::string kb_id, std::size_t dim, std::vector<IndexEntry> entries)
    : kb_id_(std::move(kb_id)), dim_(dim), entries_(std::move(entries)) {
    if (dim_ == 0) throw std::invalid_argument("index dimension must be positive");
    std::set<std::string> seen;
    for (auto& e : entries_) {
        if (e.embedding.size() != dim_) {
            throw std::invalid_argument("chunk " + e.chunk_id + ": embedding has " + std::to_string(e.embedding.size()) +
                                        " dimensions, index expects " + std::to_string(dim_));
        }
        if (!seen.insert(e.chunk_id).second) throw std::invalid_argument("duplicate chunk_id " + e.chunk_id);
        e.code = binarize(e.embedding);
        e.kb_id = kb_id_;
    }
}

const IndexEntry* VectorIndex::find(std::string_view chunk_id) const {
    for (const auto& e : entries_) {
        if (e.chunk_id == chunk_id) return &e;
    }
    return nullptr;
}

std::vector<Candidate> VectorIndex::hamming_top_n(const BinaryCode& query, const FilterExpr& filter,
                                                  std::size_t n) const {
    if (n == 0) throw std::invalid_argument("hamming_top_n: n must be at least 1");
    if (query.dim != dim_) {
        throw std::invalid_argument("query code has " + std::to_string(query.dim) + " bits, index '" + kb_id_ +
                                    "' expects " + std::to_string(dim_));
    }
    std::vector<Candidate> pool;
    pool.reserve(entries_.size());
    for (const auto& e : entries_) {
        if (!filter.empty() && !metadata_filter(e.metadata, filter)) continue;
        pool.push_back({&e, hamming_distance(query, e.code)});
    }
    const auto by_distance = [](const Candidate& a, const Candidate& b) {
        if (a.hamming != b.hamming) return a.hamming < b.hamming;
        return a.entry->chunk_id < b.entry->chunk_id;
    };
    const std::size_t keep = std::min(n, pool.size());
    std::partial_sort(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(keep), pool.end(), by_distance);
    pool.resize(keep);
    return pool;
}

std::filesystem::path VectorIndex::index_path(const std::filesystem::path& dir, std::string_view kb_id) {
    return dir / (std::string(kb_id) + ".idx");
}

namespace {

constexpr char kMagic[8] = {'R', 'K', 'V', 'I', 'D', 'X', '\0', '\0'};

template <class T>
void write_pod(std::ofstream& out, const T& value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <class T>
T read_pod(std::ifstream& in) {
    T value{};
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in) throw std::runtime_error("index file truncated");
    return value;
}

std::filesystem::path sidecar_path(const std::filesystem::path& idx_file) {
    auto p = idx_file;
    p.replace_extension(".meta.jsonl");
    return p;
}

}  // namespace

void VectorIndex::save(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    const auto idx_file = index_path(dir, kb_id_);
    const auto tmp = std::filesystem::path(idx_file.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out.write(kMagic, sizeof kMagic);
        write_pod(out, kFormatVersion);
        write_pod(out, kSchemeSignBit);
        write_pod(out, static_cast<std::uint32_t>(dim_));
        write_pod(out, static_cast<std::uint32_t>(kb_id_.size()));
        out.write(kb_id_.data(), static_cast<std::streamsize>(kb_id_.size()));
        write_pod(out, static_cast<std::uint64_t>(entries_.size()));
        for (const auto& e : entries_) {
            out.write(reinterpret_cast<const char*>(e.code.words.data()),
                      static_cast<std::streamsize>(e.code.words.size() * sizeof(std::uint64_t)));
        }
        for (const auto& e : entries_) {
            out.write(reinterpret_cast<const char*>(e.embedding.data()),
                      static_cast<std::streamsize>(e.embedding.size() * sizeof(float)));
        }
        if (!out) throw std::runtime_error("failed writing " + tmp.string());
    }
    std::vector<json> rows;
    rows.reserve(entries_.size());
    for (const auto& e : entries_) {
        rows.push_back({{"chunk_id", e.chunk_id},
                        {"doc_id", e.doc_id},
                        {"text", e.text},
                        {"metadata", e.metadata},
                        {"start", e.start},
                        {"end", e.end}});
    }
    write_json_lines(sidecar_path(idx_file), rows);
    std::filesystem::rename(tmp, idx_file);
}

std::shared_ptr<const VectorIndex> VectorIndex::load(const std::filesystem::path& idx_file) {
    std::ifstream in(idx_file, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + idx_file.string());
    char magic[8];
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, kMagic, sizeof magic) != 0) {
        throw std::runtime_error(idx_file.string() + ": not a ragkit index file");
    }
    const auto version = read_pod<std::uint32_t>(in);
    if (version != kFormatVersion) {
        throw std::runtime_error(idx_file.string() + ": unsupported index format version " + std::to_string(version));
    }
    const auto scheme = read_pod<std::uint32_t>(in);
    if (scheme != kSchemeSignBit) throw std::runtime_error(idx_file.string() + ": unknown quantization scheme");
    const auto dim = read_pod<std::uint32_t>(in);
    const auto kb_len = read_pod<std::uint32_t>(in);
    std::string kb_id(kb_len, '\0');
    in.read(kb_id.data(), kb_len);
    const auto count = read_pod<std::uint64_t>(in);

    const std::size_t words_per_code = (dim + 63) / 64;
    std::vector<std::uint64_t> codes(count * words_per_code);
    in.read(reinterpret_cast<char*>(codes.data()), static_cast<std::streamsize>(codes.size() * sizeof(std::uint64_t)));
    std::vector<float> values(count * dim);
    in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(values.size() * sizeof(float)));
    if (!in) throw std::runtime_error(idx_file.string() + ": index file truncated");

    const auto rows = read_json_lines(sidecar_path(idx_file));
    if (rows.size() != count) throw std::runtime_error(idx_file.string() + ": sidecar row count does not match index");

    std::vector<IndexEntry> entries(count);
    for (std::size_t i = 0; i < count; ++i) {
        auto& e = entries[i];
        const auto& row = rows[i];
        e.chunk_id = row.at("chunk_id").get<std::string>();
        e.doc_id = row.value("doc_id", std::string{});
        e.text = row.value("text", std::string{});
        const json meta = row.value("metadata", json::object());
        for (const auto& [k, v] : meta.items()) e.metadata[k] = v.get<std::string>();
        e.start = row.value("start", std::size_t{0});
        e.end = row.value("end", std::size_t{0});
        e.embedding.assign(values.begin() + static_cast<std::ptrdiff_t>(i * dim),
                           values.begin() + static_cast<std::ptrdiff_t>((i + 1) * dim));
    }
    auto index = std::make_shared<const VectorIndex>(kb_id, dim, std::move(entries));
    // Codes are recomputed from the stored embeddings; the stored copy must agree.
    for (std::size_t i = 0; i < count; ++i) {
        const auto& code = index->entries()[i].code;
        if (!std::equal(code.words.begin(), code.words.end(), codes.begin() + static_cast<std::ptrdiff_t>(i * words_per_code))) {
            throw std::runtime_error(idx_file.string() + ": stored code of " + index->entries()[i].chunk_id +
                                     " disagrees with its embedding");
        }
    }
    return index;
}

// ============================================================================
// KbRegistry
// ============================================================================

void KbRegistry::put(std::shared_ptr<const VectorIndex> index) {
    std::lock_guard lock(mutex_);
    indexes_[index->kb_id()] = std::move(index);
}

std::shared_ptr<const VectorIndex> KbRegistry::get(const std::string& kb_id) const {
    std::lock_guard lock(mutex_);
    auto it = indexes_.find(kb_id);
    if (it == indexes_.end()) throw UnknownKbError(kb_id);
    return it->second;
}

bool KbRegistry::contains(const std::string& kb_id) const {
    std::lock_guard lock(mutex_);
    return indexes_.count(kb_id) > 0;
}

std::vector<std::string> KbRegistry::ids() const {
    std::lock_guard lock(mutex_);
    std::vector<std::string> out;
    for (const auto& [id, idx] : indexes_) out.push_back(id);
    return out;
}

void KbRegistry::load_dir(const std::filesystem::path& dir) {
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.path().extension() == ".idx") put(VectorIndex::load(entry.path()));
    }
}

}  // namespace ragkit::index
