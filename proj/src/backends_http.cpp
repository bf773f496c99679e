#include <chrono>
#include <cmath>
#include <optional>
#include <thread>

#include <fmt/format.h>
#include <httplib.h>

#include "wbrag/backends.hpp"
#include "wbrag/error.hpp"

namespace wbrag {

namespace {

struct SplitUrl {
    std::string origin;  // scheme://host[:port]
    std::string prefix;  // path without trailing slash
};

SplitUrl split_base_url(const std::string& base) {
    const auto scheme = base.find("://");
    if (scheme == std::string::npos) {
        throw BackendError(fmt::format("endpoint base URL '{}' lacks a scheme", base));
    }
    const auto path = base.find('/', scheme + 3);
    SplitUrl out;
    out.origin = base.substr(0, path);
    out.prefix = path == std::string::npos ? std::string() : base.substr(path);
    while (!out.prefix.empty() && out.prefix.back() == '/') out.prefix.pop_back();
    return out;
}

class SemaphoreGuard {
public:
    explicit SemaphoreGuard(std::counting_semaphore<>& sem) : sem_(sem) { sem_.acquire(); }
    ~SemaphoreGuard() { sem_.release(); }
    SemaphoreGuard(const SemaphoreGuard&) = delete;
    SemaphoreGuard& operator=(const SemaphoreGuard&) = delete;

private:
    std::counting_semaphore<>& sem_;
};

std::ptrdiff_t semaphore_count(std::size_t max_in_flight) {
    return static_cast<std::ptrdiff_t>(std::max<std::size_t>(1, max_in_flight));
}

// POSTs `body` to <base><endpoint>, retrying connection failures and non-2xx
// statuses with exponential backoff. Returns the response body.
std::string post_with_retries(const EndpointConfig& cfg, std::string_view endpoint,
                              const std::string& body, std::atomic<std::size_t>& retries,
                              std::atomic<std::size_t>& requests) {
    const auto url = split_base_url(cfg.base_url);
    const auto path = url.prefix + std::string(endpoint);

    httplib::Client client(url.origin);
    const auto secs = static_cast<time_t>(cfg.timeout_seconds);
    const auto usecs = static_cast<time_t>((cfg.timeout_seconds - static_cast<double>(secs)) * 1e6);
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);

    httplib::Headers headers;
    if (!cfg.api_key.empty()) headers.emplace("Authorization", "Bearer " + cfg.api_key);

    std::string last_error;
    const int attempts = 1 + std::max(0, cfg.max_retries);
    for (int attempt = 0; attempt < attempts; ++attempt) {
        if (attempt > 0) {
            ++retries;
            const auto delay = std::chrono::milliseconds(
                static_cast<long long>(cfg.backoff_ms) * (1LL << std::min(attempt - 1, 16)));
            std::this_thread::sleep_for(delay);
        }
        ++requests;
        auto res = client.Post(path, headers, body, "application/json");
        if (!res) {
            last_error = fmt::format("transport error: {}", httplib::to_string(res.error()));
            continue;
        }
        if (res->status >= 200 && res->status < 300) return res->body;
        last_error = fmt::format("HTTP {}", res->status);
    }
    throw BackendError(fmt::format("POST {}{} failed after {} attempt(s): {}", url.origin, path,
                                   attempts, last_error));
}

json parse_body(const std::string& body) {
    try {
        return json::parse(body);
    } catch (const json::parse_error& e) {
        throw BackendError(fmt::format("malformed response body: {}", e.what()));
    }
}

}  // namespace

ChatClient::ChatClient(EndpointConfig config)
    : config_(std::move(config)), in_flight_(semaphore_count(config_.max_in_flight)) {}

std::string ChatClient::generate(const GenerationRequest& request) {
    const json payload = {
        {"model", config_.model},
        {"messages",
         json::array({{{"role", "system"}, {"content", request.system}},
                      {{"role", "user"}, {"content", request.user}}})},
        {"max_tokens", request.max_new_tokens},
        {"temperature", request.temperature},
    };
    std::string body;
    {
        SemaphoreGuard guard(in_flight_);
        body = post_with_retries(config_, "/chat/completions", payload.dump(), retries_, requests_);
    }
    const auto doc = parse_body(body);
    auto choices = doc.find("choices");
    if (choices == doc.end() || !choices->is_array() || choices->empty()) {
        throw BackendError("malformed response: missing field 'choices'");
    }
    const auto& first = (*choices)[0];
    auto message = first.find("message");
    if (message == first.end() || !message->is_object()) {
        throw BackendError("malformed response: missing field 'choices[0].message'");
    }
    auto content = message->find("content");
    if (content == message->end() || !content->is_string()) {
        throw BackendError("malformed response: missing field 'choices[0].message.content'");
    }
    return content->get<std::string>();
}

HttpEmbedder::HttpEmbedder(EndpointConfig config)
    : config_(std::move(config)), in_flight_(semaphore_count(config_.max_in_flight)) {
    if (config_.batch_size == 0) throw Error("embedding batch size must be positive");
}

std::vector<EmbeddingVector> HttpEmbedder::embed(std::span<const std::string> texts) {
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (std::size_t begin = 0; begin < texts.size(); begin += config_.batch_size) {
        const auto n = std::min(config_.batch_size, texts.size() - begin);
        auto part = embed_batch(texts.subspan(begin, n));
        for (auto& v : part) out.push_back(std::move(v));
    }
    return out;
}

std::vector<EmbeddingVector> HttpEmbedder::embed_batch(std::span<const std::string> texts) {
    const json payload = {{"model", config_.model},
                          {"input", std::vector<std::string>(texts.begin(), texts.end())}};
    std::string body;
    {
        SemaphoreGuard guard(in_flight_);
        body = post_with_retries(config_, "/embeddings", payload.dump(), retries_, requests_);
    }
    const auto doc = parse_body(body);
    auto data = doc.find("data");
    if (data == doc.end() || !data->is_array()) {
        throw BackendError("malformed response: missing field 'data'");
    }
    if (data->size() != texts.size()) {
        throw BackendError(fmt::format("embedding count mismatch: sent {}, received {}",
                                       texts.size(), data->size()));
    }
    std::vector<std::optional<EmbeddingVector>> slots(texts.size());
    for (std::size_t i = 0; i < data->size(); ++i) {
        const auto& item = (*data)[i];
        auto emb = item.find("embedding");
        if (emb == item.end() || !emb->is_array()) {
            throw BackendError(fmt::format("malformed response: missing field 'data[{}].embedding'", i));
        }
        std::size_t slot = i;
        if (auto idx = item.find("index"); idx != item.end() && idx->is_number_unsigned()) {
            slot = idx->get<std::size_t>();
        }
        if (slot >= slots.size() || slots[slot].has_value()) {
            throw BackendError(fmt::format("malformed response: bad index in 'data[{}]'", i));
        }
        std::vector<float> values;
        try {
            values = emb->get<std::vector<float>>();
        } catch (const json::exception&) {
            throw BackendError(fmt::format("malformed response: non-numeric 'data[{}].embedding'", i));
        }
        auto vec = EmbeddingVector::normalized(std::move(values));
        std::size_t expected = 0;
        if (!dim_.compare_exchange_strong(expected, vec.dim()) && expected != vec.dim()) {
            throw BackendError(
                fmt::format("embedding dimension mismatch: expected {}, got {}", expected, vec.dim()));
        }
        slots[slot] = std::move(vec);
    }
    std::vector<EmbeddingVector> out;
    out.reserve(slots.size());
    for (auto& s : slots) out.push_back(std::move(*s));
    return out;
}

std::string http_generate(const GenerationRequest& request, const EndpointConfig& config) {
    ChatClient client(config);
    return client.generate(request);
}

std::vector<EmbeddingVector> http_embed(std::span<const std::string> texts,
                                        const EndpointConfig& config) {
    if (texts.empty()) return {};
    HttpEmbedder embedder(config);
    return embedder.embed(texts);
}

}  // namespace wbrag
