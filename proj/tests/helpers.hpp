#pragma once

#include <filesystem>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "ragkit/chunker.hpp"
#include "ragkit/mocks.hpp"
#include "ragkit/retrieval.hpp"
#include "ragkit/vector_index.hpp"

namespace testing_util {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() / ("ragkit_" + tag + "_" + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::string file(const std::string& name) const { return (path_ / name).string(); }

private:
    std::filesystem::path path_;
};

inline ragkit::chunking::Chunk make_chunk(const std::string& doc, std::size_t i, const std::string& text,
                                          ragkit::corpus::Metadata meta = {}) {
    ragkit::chunking::Chunk c;
    c.doc_id = doc;
    c.chunk_id = ragkit::chunking::make_chunk_id(doc, i);
    c.text = text;
    c.word_count = ragkit::count_words(text);
    c.metadata = std::move(meta);
    c.span = {0, text.size()};
    return c;
}

// Hashing-embedder index over `texts`, one chunk per text.
inline std::shared_ptr<const ragkit::index::VectorIndex> hashed_index(const std::string& kb,
                                                                     const std::vector<std::string>& texts,
                                                                     std::size_t dim = 256) {
    ragkit::gateway::HashingEmbedder emb(dim);
    std::vector<ragkit::index::IndexEntry> entries;
    for (std::size_t i = 0; i < texts.size(); ++i) {
        ragkit::index::IndexEntry e;
        e.chunk_id = ragkit::chunking::make_chunk_id(kb + "-doc", i);
        e.doc_id = kb + "-doc";
        e.text = texts[i];
        e.embedding = emb.embed_one(texts[i]);
        e.metadata = {{"source", kb}};
        e.end = texts[i].size();
        entries.push_back(std::move(e));
    }
    return std::make_shared<const ragkit::index::VectorIndex>(kb, dim, std::move(entries));
}

inline std::vector<std::string> earth_texts() {
    return {"Sentinel-2 MSI acquires optical imagery at 10 m spatial resolution in visible bands.",
            "Landsat 8 OLI provides 30 m multispectral imagery with a 16 day revisit.",
            "Sea surface temperature is retrieved from thermal infrared radiometers.",
            "Soil moisture estimates come from L-band passive microwave radiometry.",
            "Synthetic aperture radar penetrates clouds and observes day and night.",
            "Aerosol optical depth is derived from multi-angle spectral observations."};
}

}  // namespace testing_util
