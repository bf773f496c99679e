#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace wbrag {

/// Unit-L2-normalized dense vector; dot product equals cosine similarity.
class EmbeddingVector {
public:
    EmbeddingVector() = default;

    /// Normalizes `values`. Non-finite input raises Error. A zero vector maps
    /// to the unit vector along coordinate 0.
    static EmbeddingVector normalized(std::vector<float> values);

    [[nodiscard]] std::size_t dim() const noexcept { return values_.size(); }
    [[nodiscard]] std::span<const float> values() const noexcept { return values_; }
    [[nodiscard]] double norm() const noexcept;

    friend bool operator==(const EmbeddingVector&, const EmbeddingVector&) = default;

private:
    explicit EmbeddingVector(std::vector<float> v) : values_(std::move(v)) {}
    std::vector<float> values_;
};

/// Accumulates in double; dims must match.
double dot(const EmbeddingVector& a, const EmbeddingVector& b);

}  // namespace wbrag
