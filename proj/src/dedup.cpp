#include "ragkit/dedup.hpp"

#include <algorithm>
#include <map>
#include <random>
#include <set>
#include <stdexcept>
#include <unordered_map>

#include <openssl/evp.h>

namespace ragkit::corpus {

using nlohmann::json;

namespace {

constexpr std::uint64_t kMersenne61 = (std::uint64_t{1} << 61) - 1;

std::uint64_t mod_mersenne61(unsigned __int128 x) {
    std::uint64_t lo = static_cast<std::uint64_t>(x & kMersenne61);
    std::uint64_t hi = static_cast<std::uint64_t>(x >> 61);
    std::uint64_t r = lo + hi;
    while (r >= kMersenne61) r -= kMersenne61;
    return r;
}

}  // namespace

void MinHashConfig::validate() const {
    if (shingle_size == 0) throw std::invalid_argument("minhash: shingle_size must be positive");
    if (num_perms == 0 || lsh_bands == 0) throw std::invalid_argument("minhash: num_perms and lsh_bands must be positive");
    if (num_perms % lsh_bands != 0) {
        throw std::invalid_argument("minhash: num_perms (" + std::to_string(num_perms) +
                                    ") is not divisible by lsh_bands (" + std::to_string(lsh_bands) + ")");
    }
    if (threshold < 0.0 || threshold > 1.0) throw std::invalid_argument("minhash: threshold must lie in [0,1]");
}

MinHashConfig MinHashConfig::from_json(const json& j) {
    MinHashConfig c;
    for (const auto& [key, value] : j.items()) {
        if (key == "shingle_size") c.shingle_size = value.get<std::size_t>();
        else if (key == "num_perms") c.num_perms = value.get<std::size_t>();
        else if (key == "lsh_bands") c.lsh_bands = value.get<std::size_t>();
        else if (key == "threshold") c.threshold = value.get<double>();
        else if (key == "seed") c.seed = value.get<std::uint64_t>();
        else if (key == "shingle_unit") {
            if (value != "word") throw std::invalid_argument("minhash: only word shingles are supported");
        } else if (key == "rows_per_band") continue;  // derived; checked below
        else throw std::invalid_argument("unknown minhash config key '" + key + "'");
    }
    c.validate();
    if (j.contains("rows_per_band") && j["rows_per_band"].get<std::size_t>() != c.num_perms / c.lsh_bands) {
        throw std::invalid_argument("minhash: rows_per_band disagrees with num_perms / lsh_bands");
    }
    return c;
}

json MinHashConfig::to_json() const {
    return {{"shingle_unit", "word"},
            {"shingle_size", shingle_size},
            {"num_perms", num_perms},
            {"lsh_bands", lsh_bands},
            {"rows_per_band", lsh_bands ? num_perms / lsh_bands : 0},
            {"threshold", threshold},
            {"seed", seed}};
}

json DedupReport::to_json() const {
    json groups = json::array();
    for (const auto& g : exact_duplicate_groups) {
        groups.push_back({{"digest", g.digest}, {"ids", g.ids}, {"kept", g.kept}});
    }
    json pairs = json::array();
    auto ref = [](const SpanRef& r) {
        return json{{"doc_id", r.doc_id}, {"segment", r.segment}, {"start", r.span.start}, {"end", r.span.end}};
    };
    for (const auto& p : near_duplicate_pairs) {
        pairs.push_back({{"a", ref(p.a)}, {"b", ref(p.b)}, {"estimated_jaccard", p.estimated_jaccard}});
    }
    json out{{"digest_algorithm", digest_algorithm},
             {"exact_duplicate_groups", groups},
             {"near_duplicate_pairs", pairs}};
    if (!minhash_config.is_null()) out["minhash"] = minhash_config;
    return out;
}

// ============================================================================
// Exact dedup
// ============================================================================

std::string sha256_hex(std::string_view bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw std::runtime_error("sha256 digest failed");
    }
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xF]);
    }
    return out;
}

DedupReport exact_dedup(std::span<const TextRef> docs) {
    DedupReport report;
    std::map<std::string, std::size_t> group_of;  // digest -> index into groups
    std::vector<ExactDuplicateGroup> groups;
    for (const auto& doc : docs) {
        std::string digest = sha256_hex(doc.text);
        auto [it, inserted] = group_of.try_emplace(digest, groups.size());
        if (inserted) groups.push_back({digest, {}, std::string(doc.id)});
        groups[it->second].ids.emplace_back(doc.id);
    }
    for (auto& g : groups) {
        if (g.ids.size() > 1) report.exact_duplicate_groups.push_back(std::move(g));
    }
    return report;
}

DedupReport exact_dedup(std::span<const RawDocument> docs) {
    std::vector<TextRef> refs;
    refs.reserve(docs.size());
    for (const auto& d : docs) refs.push_back({d.id, d.text});
    return exact_dedup(refs);
}

std::vector<std::string> kept_ids(std::span<const TextRef> docs, const DedupReport& report) {
    std::set<std::string> dropped;
    for (const auto& g : report.exact_duplicate_groups) {
        for (const auto& id : g.ids) {
            if (id != g.kept) dropped.insert(id);
        }
    }
    std::vector<std::string> out;
    std::set<std::string> seen;
    for (const auto& d : docs) {
        std::string id(d.id);
        if (dropped.count(id) || !seen.insert(id).second) continue;
        out.push_back(std::move(id));
    }
    return out;
}

// ============================================================================
// MinHash
// ============================================================================

std::vector<std::uint64_t> word_shingle_hashes(std::string_view text, std::size_t k) {
    const auto words = word_spans(text);
    std::vector<std::uint64_t> out;
    if (words.empty() || k == 0) return out;
    const std::size_t width = std::min(k, words.size());
    std::string shingle;
    for (std::size_t i = 0; i + width <= words.size(); ++i) {
        shingle.clear();
        for (std::size_t w = i; w < i + width; ++w) {
            if (w > i) shingle.push_back(' ');
            shingle.append(to_lower_ascii(text.substr(words[w].start, words[w].size())));
        }
        out.push_back(fnv1a64(shingle));
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

MinHasher::MinHasher(std::size_t num_perms, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::uint64_t> pick_a(1, kMersenne61 - 1);
    std::uniform_int_distribution<std::uint64_t> pick_b(0, kMersenne61 - 1);
    a_.resize(num_perms);
    b_.resize(num_perms);
    for (std::size_t i = 0; i < num_perms; ++i) {
        a_[i] = pick_a(rng);
        b_[i] = pick_b(rng);
    }
}

std::vector<std::uint64_t> MinHasher::signature(std::span<const std::uint64_t> shingle_hashes) const {
    std::vector<std::uint64_t> sig(a_.size(), kMersenne61);
    for (std::uint64_t h : shingle_hashes) {
        const std::uint64_t x = mod_mersenne61(h);
        for (std::size_t i = 0; i < a_.size(); ++i) {
            const auto prod = static_cast<unsigned __int128>(a_[i]) * x + b_[i];
            const std::uint64_t v = mod_mersenne61(prod);
            if (v < sig[i]) sig[i] = v;
        }
    }
    return sig;
}

double MinHasher::estimate(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b) {
    if (a.size() != b.size() || a.empty()) throw std::invalid_argument("minhash: signature length mismatch");
    std::size_t same = 0;
    for (std::size_t i = 0; i < a.size(); ++i) same += a[i] == b[i];
    return static_cast<double>(same) / static_cast<double>(a.size());
}

std::vector<ByteSpan> paragraph_segments(std::string_view text) {
    std::vector<ByteSpan> out;
    std::size_t pos = 0;
    std::size_t seg_start = std::string_view::npos;
    std::size_t seg_end = 0;
    while (pos <= text.size()) {
        const std::size_t nl = text.find('\n', pos);
        const std::size_t end = nl == std::string_view::npos ? text.size() : nl;
        const bool blank = trim(text.substr(pos, end - pos)).empty();
        if (blank) {
            if (seg_start != std::string_view::npos) {
                out.push_back(trim_span(text, {seg_start, seg_end}));
                seg_start = std::string_view::npos;
            }
        } else {
            if (seg_start == std::string_view::npos) seg_start = pos;
            seg_end = end;
        }
        if (nl == std::string_view::npos) break;
        pos = nl + 1;
    }
    if (seg_start != std::string_view::npos) out.push_back(trim_span(text, {seg_start, seg_end}));
    return out;
}

DedupReport minhash_near_dup(std::span<const TextRef> docs, const MinHashConfig& config) {
    config.validate();
    DedupReport report;
    report.minhash_config = config.to_json();

    struct Segment {
        SpanRef ref;
        std::vector<std::uint64_t> sig;
    };
    std::vector<Segment> segments;
    const MinHasher hasher(config.num_perms, config.seed);
    for (const auto& doc : docs) {
        const auto paras = paragraph_segments(doc.text);
        for (std::size_t s = 0; s < paras.size(); ++s) {
            const auto shingles =
                word_shingle_hashes(doc.text.substr(paras[s].start, paras[s].size()), config.shingle_size);
            if (shingles.empty()) continue;
            segments.push_back({{std::string(doc.id), s, paras[s]}, hasher.signature(shingles)});
        }
    }

    const std::size_t rows = config.num_perms / config.lsh_bands;
    std::set<std::pair<std::size_t, std::size_t>> candidates;
    for (std::size_t band = 0; band < config.lsh_bands; ++band) {
        std::unordered_map<std::uint64_t, std::vector<std::size_t>> buckets;
        for (std::size_t i = 0; i < segments.size(); ++i) {
            std::uint64_t key = 0x9e3779b97f4a7c15ULL ^ band;
            for (std::size_t r = band * rows; r < (band + 1) * rows; ++r) {
                key ^= segments[i].sig[r] + 0x9e3779b97f4a7c15ULL + (key << 6) + (key >> 2);
            }
            buckets[key].push_back(i);
        }
        for (const auto& [key, members] : buckets) {
            for (std::size_t x = 0; x < members.size(); ++x) {
                for (std::size_t y = x + 1; y < members.size(); ++y) candidates.emplace(members[x], members[y]);
            }
        }
    }

    for (const auto& [i, j] : candidates) {
        const double est = MinHasher::estimate(segments[i].sig, segments[j].sig);
        if (est >= config.threshold) report.near_duplicate_pairs.push_back({segments[i].ref, segments[j].ref, est});
    }
    return report;
}

}  // namespace ragkit::corpus
