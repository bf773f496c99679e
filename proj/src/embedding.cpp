#include "wbrag/embedding.hpp"

#include <cmath>

#include <fmt/format.h>

#include "wbrag/error.hpp"

namespace wbrag {

EmbeddingVector EmbeddingVector::normalized(std::vector<float> values) {
    if (values.empty()) throw Error("embedding vector must have positive dimension");
    double sq = 0.0;
    for (float v : values) {
        if (!std::isfinite(v)) throw Error("embedding vector contains a non-finite value");
        sq += static_cast<double>(v) * static_cast<double>(v);
    }
    if (sq == 0.0) {
        std::fill(values.begin(), values.end(), 0.0f);
        values[0] = 1.0f;
        return EmbeddingVector(std::move(values));
    }
    const double inv = 1.0 / std::sqrt(sq);
    for (auto& v : values) v = static_cast<float>(static_cast<double>(v) * inv);
    return EmbeddingVector(std::move(values));
}

double EmbeddingVector::norm() const noexcept {
    double sq = 0.0;
    for (float v : values_) sq += static_cast<double>(v) * static_cast<double>(v);
    return std::sqrt(sq);
}

double dot(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.dim() != b.dim()) {
        throw Error(fmt::format("dimension mismatch: {} vs {}", a.dim(), b.dim()));
    }
    const auto x = a.values();
    const auto y = b.values();
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        acc += static_cast<double>(x[i]) * static_cast<double>(y[i]);
    }
    return acc;
}

}  // namespace wbrag
