#include "wbrag/index.hpp"

#include <algorithm>
#include <mutex>
#include <optional>

#include <fmt/format.h>

#include "wbrag/error.hpp"
#include "wbrag/jsonl.hpp"

namespace wbrag {

bool ranks_before(const RetrievalHit& a, const RetrievalHit& b) noexcept {
    if (a.score != b.score) return a.score > b.score;
    if (a.doc_id != b.doc_id) return a.doc_id < b.doc_id;
    return a.source < b.source;  // only reachable on cross-index id collisions
}

namespace {

void check_query_dim(std::size_t index_dim, const EmbeddingVector& query) {
    if (query.dim() != index_dim) {
        throw Error(fmt::format("query dimension {} does not match index dimension {}", query.dim(),
                                index_dim));
    }
}

std::vector<RetrievalHit> top_k(std::vector<RetrievalHit> hits, std::size_t k) {
    k = std::min(k, hits.size());
    std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(k), hits.end(),
                      ranks_before);
    hits.resize(k);
    for (std::size_t i = 0; i < hits.size(); ++i) hits[i].rank = static_cast<int>(i + 1);
    return hits;
}

}  // namespace

VectorIndex::VectorIndex(std::size_t dim, Source label)
    : dim_(dim), label_(label), mu_(std::make_unique<std::shared_mutex>()) {}

VectorIndex::VectorIndex(const VectorIndex& other)
    : dim_(0), label_(other.label_), mu_(std::make_unique<std::shared_mutex>()) {
    std::shared_lock lock(*other.mu_);
    dim_ = other.dim_;
    entries_ = other.entries_;
    ids_ = other.ids_;
}

VectorIndex::VectorIndex(VectorIndex&& other) noexcept
    : dim_(other.dim_),
      label_(other.label_),
      entries_(std::move(other.entries_)),
      ids_(std::move(other.ids_)),
      mu_(std::move(other.mu_)) {
    other.mu_ = std::make_unique<std::shared_mutex>();
}

VectorIndex& VectorIndex::operator=(VectorIndex other) noexcept {
    swap(*this, other);
    return *this;
}

void swap(VectorIndex& a, VectorIndex& b) noexcept {
    using std::swap;
    swap(a.dim_, b.dim_);
    swap(a.label_, b.label_);
    swap(a.entries_, b.entries_);
    swap(a.ids_, b.ids_);
    swap(a.mu_, b.mu_);
}

void VectorIndex::append(std::string doc_id, EmbeddingVector vector) {
    std::unique_lock lock(*mu_);
    if (dim_ == 0) dim_ = vector.dim();
    if (vector.dim() != dim_) {
        throw Error(fmt::format("vector for '{}' has dimension {}, index expects {}", doc_id,
                                vector.dim(), dim_));
    }
    if (ids_.contains(doc_id)) {
        throw Error(fmt::format("duplicate doc_id '{}' in {} index", doc_id, to_string(label_)));
    }
    ids_.insert(doc_id);
    entries_.push_back({std::move(doc_id), std::move(vector)});
}

std::size_t VectorIndex::dim() const {
    std::shared_lock lock(*mu_);
    return dim_;
}

std::size_t VectorIndex::size() const {
    std::shared_lock lock(*mu_);
    return entries_.size();
}

std::vector<VectorIndex::Entry> VectorIndex::entries() const {
    std::shared_lock lock(*mu_);
    return entries_;
}

std::vector<RetrievalHit> VectorIndex::search(const EmbeddingVector& query, std::size_t k) const {
    std::shared_lock lock(*mu_);
    if (entries_.empty() || k == 0) return {};
    check_query_dim(dim_, query);
    std::vector<RetrievalHit> hits;
    hits.reserve(entries_.size());
    for (const auto& e : entries_) {
        hits.push_back({e.doc_id, dot(e.vector, query), 0, label_});
    }
    return top_k(std::move(hits), k);
}

void VectorIndex::save(const std::filesystem::path& path) const {
    std::shared_lock lock(*mu_);
    std::vector<json> records;
    records.reserve(entries_.size() + 1);
    records.push_back({{"dim", dim_}, {"label", to_string(label_)}});
    for (const auto& e : entries_) {
        records.push_back({{"doc_id", e.doc_id},
                           {"vector", std::vector<float>(e.vector.values().begin(),
                                                         e.vector.values().end())}});
    }
    write_records(path, records);
}

VectorIndex VectorIndex::load(const std::filesystem::path& path) {
    std::optional<VectorIndex> index;
    for_each_record(path, [&](std::size_t line, const json& r) {
        try {
            if (!index) {
                index.emplace(r.at("dim").get<std::size_t>(),
                              source_from_string(r.at("label").get<std::string>()));
                return;
            }
            index->append(r.at("doc_id").get<std::string>(),
                          EmbeddingVector::normalized(r.at("vector").get<std::vector<float>>()));
        } catch (const json::exception& e) {
            throw LoadError(fmt::format("{}:{}: malformed index record: {}", path.string(), line,
                                        e.what()),
                            line);
        } catch (const LoadError&) {
            throw;
        } catch (const Error& e) {
            throw LoadError(fmt::format("{}:{}: {}", path.string(), line, e.what()), line);
        }
    });
    if (!index) throw Error(fmt::format("{}: missing index header", path.string()));
    return std::move(*index);
}

std::vector<Document> resolve_hits(std::span<const RetrievalHit> hits, const CorpusStore& original,
                                   const CorpusStore* writeback) {
    std::vector<Document> docs;
    docs.reserve(hits.size());
    for (const auto& h : hits) {
        if (h.source == Source::writeback) {
            if (writeback == nullptr) {
                throw Error(fmt::format("write-back hit '{}' without write-back documents", h.doc_id));
            }
            docs.push_back(writeback->get(h.doc_id));
        } else {
            docs.push_back(original.get(h.doc_id));
        }
    }
    return docs;
}

std::string embedding_text(const Document& doc) {
    return doc.title.empty() ? doc.text : doc.title + "\n" + doc.text;
}

void append_documents(VectorIndex& index, std::span<const Document> docs, Embedder& embedder,
                      std::size_t batch_size) {
    if (batch_size == 0) batch_size = 1;
    std::size_t batch_no = 1;
    for (std::size_t begin = 0; begin < docs.size(); begin += batch_size, ++batch_no) {
        const auto n = std::min(batch_size, docs.size() - begin);
        std::vector<std::string> texts;
        texts.reserve(n);
        for (std::size_t i = 0; i < n; ++i) texts.push_back(embedding_text(docs[begin + i]));
        std::vector<EmbeddingVector> vectors;
        try {
            vectors = embedder.embed(texts);
        } catch (const std::exception& e) {
            throw BackendError(fmt::format("embedding batch {} (documents {}..{}) failed: {}", batch_no,
                                           begin + 1, begin + n, e.what()));
        }
        if (vectors.size() != n) {
            throw BackendError(fmt::format("embedding batch {} returned {} vectors for {} texts",
                                           batch_no, vectors.size(), n));
        }
        for (std::size_t i = 0; i < n; ++i) {
            index.append(docs[begin + i].id, std::move(vectors[i]));
        }
    }
}

VectorIndex build_index(const CorpusStore& docs, Embedder& embedder, Source label,
                        std::size_t batch_size) {
    VectorIndex index(embedder.dim(), label);
    append_documents(index, docs.documents(), embedder, batch_size);
    return index;
}

std::vector<RetrievalHit> merged_search(const VectorIndex& original, const VectorIndex& writeback,
                                        const EmbeddingVector& query, std::size_t original_k,
                                        std::size_t writeback_k, std::size_t merged_k) {
    if (original.size() > 0) check_query_dim(original.dim(), query);
    if (writeback.size() > 0) check_query_dim(writeback.dim(), query);
    auto hits = original.search(query, original_k);
    auto wb = writeback.search(query, writeback_k);
    hits.insert(hits.end(), std::make_move_iterator(wb.begin()), std::make_move_iterator(wb.end()));
    return top_k(std::move(hits), merged_k);
}

}  // namespace wbrag
