#pragma once

#include <span>
#include <string>
#include <string_view>

#include "wbrag/backends.hpp"
#include "wbrag/corpus.hpp"
#include "wbrag/metrics.hpp"

namespace wbrag {

/// RAG strategy wrapped by the pipeline. `naive` concatenates all documents
/// into one prompt. `weighted` generates once per ranked prefix view
/// (top-1, top-2, ...) and scores the softmax(retrieval score / T) weighted
/// mixture of the per-view outcomes.
enum class BackboneKind { naive, weighted };

std::string_view to_string(BackboneKind kind);
BackboneKind backbone_from_string(std::string_view name);

struct BackboneAnswer {
    std::string prediction;
    double score = 0.0;
};

class Backbone {
public:
    struct Options {
        BackboneKind kind = BackboneKind::naive;
        std::string dataset = "nq";
        double weight_temperature = 0.1;
        int max_new_tokens = 128;
        double temperature = 0.0;
    };

    Backbone(Generator& generator, Options options);

    [[nodiscard]] MetricKind metric() const noexcept { return metric_; }
    [[nodiscard]] const Options& options() const noexcept { return options_; }

    /// Parametric-only answer scored against the example's golds.
    [[nodiscard]] BackboneAnswer without_retrieval(const LabeledExample& example) const;

    /// `docs` in rank order with their retrieval scores.
    [[nodiscard]] BackboneAnswer with_documents(const LabeledExample& example,
                                                std::span<const Document> docs,
                                                std::span<const double> retrieval_scores) const;

    /// Single-document context, as used by the document gate.
    [[nodiscard]] BackboneAnswer with_document(const LabeledExample& example,
                                               const Document& doc) const;

private:
    std::string generate(std::string_view question, std::span<const Document> docs,
                         bool with_retrieval) const;

    Generator& generator_;
    Options options_;
    MetricKind metric_;
};

}  // namespace wbrag
