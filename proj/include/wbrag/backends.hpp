#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <semaphore>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "wbrag/embedding.hpp"
#include "wbrag/jsonl.hpp"

namespace wbrag {

struct GenerationRequest {
    std::string system;
    std::string user;
    int max_new_tokens = 128;
    double temperature = 0.0;
};

/// Text generation provider. Implementations must be callable concurrently.
class Generator {
public:
    virtual ~Generator() = default;
    virtual std::string generate(const GenerationRequest& request) = 0;
};

/// Embedding provider. Returned vectors are normalized and share one dim.
class Embedder {
public:
    virtual ~Embedder() = default;
    virtual std::vector<EmbeddingVector> embed(std::span<const std::string> texts) = 0;
    /// 0 while the dimension is not yet known (remote providers before the first call).
    [[nodiscard]] virtual std::size_t dim() const = 0;
};

// ---------------------------------------------------------------------------
// Deterministic offline backends

/// 64-bit FNV-1a.
std::uint64_t stable_hash(std::string_view text) noexcept;

/// Hashed bag of words over normalized tokens: each token adds +-1 at a
/// hash-selected coordinate, then the vector is L2-normalized. Text without
/// tokens maps to the unit vector on coordinate 0. Requires dim >= 8.
EmbeddingVector mock_embed(std::string_view text, std::size_t dim);

class MockEmbedder final : public Embedder {
public:
    static constexpr std::size_t kDefaultDim = 256;
    explicit MockEmbedder(std::size_t dim = kDefaultDim);
    std::vector<EmbeddingVector> embed(std::span<const std::string> texts) override;
    [[nodiscard]] std::size_t dim() const override { return dim_; }

private:
    std::size_t dim_;
};

/// What the oracle "model" knows. A question is answered correctly iff each
/// of its required facts appears in the prompt's document block or in
/// parametric_facts.
struct OracleWorld {
    struct Entry {
        std::vector<std::string> required_facts;
        std::string answer;

        friend bool operator==(const Entry&, const Entry&) = default;
    };

    std::set<std::string> parametric_facts;
    std::map<std::string, Entry> answer_map;

    /// Every entry needs at least one required fact.
    void validate() const;

    friend bool operator==(const OracleWorld&, const OracleWorld&) = default;
};

json world_to_json(const OracleWorld& world);
OracleWorld world_from_json(const json& j);
OracleWorld load_world(const std::filesystem::path& path);
void save_world(const std::filesystem::path& path, const OracleWorld& world);

inline constexpr std::string_view kOracleUnknown = "UNKNOWN";

std::string oracle_generate(const GenerationRequest& request, const OracleWorld& world);

class OracleGenerator final : public Generator {
public:
    explicit OracleGenerator(OracleWorld world);
    std::string generate(const GenerationRequest& request) override;
    [[nodiscard]] const OracleWorld& world() const noexcept { return world_; }

private:
    OracleWorld world_;
};

bool is_stopword(std::string_view token);

/// Non-stopword normalized tokens of `question`, first occurrence order.
std::vector<std::string> question_terms(std::string_view question);

/// Stand-in distiller. Extractive prompts: every sentence sharing a question
/// term, as "[Doc i] s" lines, capped at the requested maximum. Rewrite
/// prompts: "Fused: <question terms>" then all evidence sentences joined by
/// single spaces.
std::string mock_distill_generate(const GenerationRequest& request);

class MockDistiller final : public Generator {
public:
    std::string generate(const GenerationRequest& request) override {
        return mock_distill_generate(request);
    }
};

// ---------------------------------------------------------------------------
// HTTP backends (chat-completions / embeddings wire shape)

struct EndpointConfig {
    std::string base_url;  // e.g. http://localhost:8000/v1
    std::string model;
    std::string api_key;
    double timeout_seconds = 60.0;
    int max_retries = 3;
    int backoff_ms = 200;
    std::size_t max_in_flight = 4;
    std::size_t batch_size = 128;
};

class ChatClient final : public Generator {
public:
    explicit ChatClient(EndpointConfig config);
    std::string generate(const GenerationRequest& request) override;

    [[nodiscard]] std::size_t total_retries() const noexcept { return retries_.load(); }
    [[nodiscard]] std::size_t requests_sent() const noexcept { return requests_.load(); }

private:
    EndpointConfig config_;
    std::counting_semaphore<> in_flight_;
    std::atomic<std::size_t> retries_{0};
    std::atomic<std::size_t> requests_{0};
};

class HttpEmbedder final : public Embedder {
public:
    explicit HttpEmbedder(EndpointConfig config);
    std::vector<EmbeddingVector> embed(std::span<const std::string> texts) override;
    [[nodiscard]] std::size_t dim() const override { return dim_.load(); }

    [[nodiscard]] std::size_t total_retries() const noexcept { return retries_.load(); }
    [[nodiscard]] std::size_t requests_sent() const noexcept { return requests_.load(); }

private:
    std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts);

    EndpointConfig config_;
    std::counting_semaphore<> in_flight_;
    std::atomic<std::size_t> dim_{0};
    std::atomic<std::size_t> retries_{0};
    std::atomic<std::size_t> requests_{0};
};

/// One-shot helpers over a fresh client.
std::string http_generate(const GenerationRequest& request, const EndpointConfig& config);
std::vector<EmbeddingVector> http_embed(std::span<const std::string> texts,
                                        const EndpointConfig& config);

/// Records every request passed through to `inner`.
class RecordingGenerator final : public Generator {
public:
    explicit RecordingGenerator(Generator& inner) : inner_(inner) {}
    std::string generate(const GenerationRequest& request) override;
    [[nodiscard]] std::vector<GenerationRequest> requests() const;

private:
    Generator& inner_;
    mutable std::mutex mu_;
    std::vector<GenerationRequest> requests_;
};

}  // namespace wbrag
