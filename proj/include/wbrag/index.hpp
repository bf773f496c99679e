#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "wbrag/backends.hpp"
#include "wbrag/corpus.hpp"
#include "wbrag/embedding.hpp"

namespace wbrag {

struct RetrievalHit {
    std::string doc_id;
    double score = 0.0;
    int rank = 0;
    Source source = Source::original;

    friend bool operator==(const RetrievalHit&, const RetrievalHit&) = default;
};

/// Ordering used by every top-k in the library: score descending, then
/// doc_id ascending.
bool ranks_before(const RetrievalHit& a, const RetrievalHit& b) noexcept;

/// Exact inner-product index over normalized vectors. Append-only: existing
/// entries never move. Appends are serialized against concurrent searches.
class VectorIndex {
public:
    struct Entry {
        std::string doc_id;
        EmbeddingVector vector;
    };

    VectorIndex(std::size_t dim, Source label);
    VectorIndex(const VectorIndex& other);
    VectorIndex(VectorIndex&& other) noexcept;
    VectorIndex& operator=(VectorIndex other) noexcept;
    ~VectorIndex() = default;

    /// Dimension is fixed by the first append when constructed with dim 0.
    void append(std::string doc_id, EmbeddingVector vector);

    [[nodiscard]] std::size_t dim() const;
    [[nodiscard]] Source label() const noexcept { return label_; }
    [[nodiscard]] std::size_t size() const;
    [[nodiscard]] std::vector<Entry> entries() const;

    /// min(k, size()) hits. An empty index returns no hits for any query.
    [[nodiscard]] std::vector<RetrievalHit> search(const EmbeddingVector& query, std::size_t k) const;

    void save(const std::filesystem::path& path) const;
    static VectorIndex load(const std::filesystem::path& path);

    friend void swap(VectorIndex& a, VectorIndex& b) noexcept;

private:
    std::size_t dim_;
    Source label_;
    std::vector<Entry> entries_;
    std::unordered_set<std::string> ids_;
    std::unique_ptr<std::shared_mutex> mu_;
};

/// Embeds every document (in batches) and appends in corpus order.
VectorIndex build_index(const CorpusStore& docs, Embedder& embedder, Source label,
                        std::size_t batch_size = 256);

/// Appends `docs` to an existing index; used for incremental write-back.
void append_documents(VectorIndex& index, std::span<const Document> docs, Embedder& embedder,
                      std::size_t batch_size = 256);

/// Searches both indexes independently (top original_k and writeback_k), then
/// returns the global top merged_k of the union.
std::vector<RetrievalHit> merged_search(const VectorIndex& original, const VectorIndex& writeback,
                                        const EmbeddingVector& query, std::size_t original_k,
                                        std::size_t writeback_k, std::size_t merged_k);

inline std::vector<RetrievalHit> merged_search(const VectorIndex& original,
                                               const VectorIndex& writeback,
                                               const EmbeddingVector& query, std::size_t k) {
    return merged_search(original, writeback, query, k, k, k);
}

/// Documents behind `hits`, in hit order. Write-back hits resolve against
/// `writeback`; a missing id raises Error.
std::vector<Document> resolve_hits(std::span<const RetrievalHit> hits, const CorpusStore& original,
                                   const CorpusStore* writeback = nullptr);

/// Text embedded for a document: title and text on separate lines, or the text
/// alone when the title is empty.
std::string embedding_text(const Document& doc);

}  // namespace wbrag
