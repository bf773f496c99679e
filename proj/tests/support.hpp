#pragma once

#include <atomic>
#include <filesystem>
#include <functional>
#include <random>
#include <string>

#include <unistd.h>

#include "wbrag/backends.hpp"
#include "wbrag/jsonl.hpp"

namespace wbrag::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("wbrag-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    [[nodiscard]] const std::filesystem::path& path() const { return path_; }
    [[nodiscard]] std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& path, const std::string& content) {
    write_text_file(path, content);
}

/// Generator driven by a callback; handy for partial-credit scenarios.
class ScriptedGenerator final : public Generator {
public:
    explicit ScriptedGenerator(std::function<std::string(const GenerationRequest&)> fn)
        : fn_(std::move(fn)) {}
    std::string generate(const GenerationRequest& request) override { return fn_(request); }

private:
    std::function<std::string(const GenerationRequest&)> fn_;
};

/// Uniform integer in [lo, hi] without relying on library distributions.
inline long long uniform(std::mt19937_64& rng, long long lo, long long hi) {
    return lo + static_cast<long long>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
}

inline double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace wbrag::testing
