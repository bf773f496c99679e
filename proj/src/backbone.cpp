#include "wbrag/backbone.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <fmt/format.h>

#include "wbrag/error.hpp"
#include "wbrag/prompts.hpp"

namespace wbrag {

std::string_view to_string(BackboneKind kind) {
    return kind == BackboneKind::weighted ? "weighted" : "naive";
}

BackboneKind backbone_from_string(std::string_view name) {
    if (name == "naive") return BackboneKind::naive;
    if (name == "weighted") return BackboneKind::weighted;
    throw Error(fmt::format("unknown backbone '{}' (expected naive or weighted)", name));
}

Backbone::Backbone(Generator& generator, Options options)
    : generator_(generator),
      options_(std::move(options)),
      metric_(metric_for_dataset(options_.dataset)) {
    if (!(options_.weight_temperature > 0.0)) {
        throw Error("weighted backbone temperature must be positive");
    }
}

std::string Backbone::generate(std::string_view question, std::span<const Document> docs,
                               bool with_retrieval) const {
    const auto prompt = build_task_prompt(options_.dataset, question, docs, with_retrieval);
    return generator_.generate(
        {prompt.system, prompt.user, options_.max_new_tokens, options_.temperature});
}

BackboneAnswer Backbone::without_retrieval(const LabeledExample& example) const {
    auto prediction = generate(example.question, {}, false);
    const double s = score(metric_, prediction, example.gold_answers);
    return {std::move(prediction), s};
}

BackboneAnswer Backbone::with_document(const LabeledExample& example, const Document& doc) const {
    const double one = 1.0;
    return with_documents(example, std::span<const Document>(&doc, 1), std::span<const double>(&one, 1));
}

BackboneAnswer Backbone::with_documents(const LabeledExample& example,
                                        std::span<const Document> docs,
                                        std::span<const double> retrieval_scores) const {
    if (docs.size() != retrieval_scores.size()) {
        throw Error("backbone: documents and retrieval scores differ in length");
    }
    if (options_.kind == BackboneKind::naive || docs.size() <= 1) {
        auto prediction = generate(example.question, docs, true);
        const double s = score(metric_, prediction, example.gold_answers);
        return {std::move(prediction), s};
    }

    // Softmax over retrieval scores, shifted by the max for stability.
    const double top = *std::max_element(retrieval_scores.begin(), retrieval_scores.end());
    std::vector<double> weights(docs.size());
    double total = 0.0;
    for (std::size_t i = 0; i < docs.size(); ++i) {
        weights[i] = std::exp((retrieval_scores[i] - top) / options_.weight_temperature);
        total += weights[i];
    }

    double expected = 0.0;
    std::map<std::string, double> votes;
    std::vector<std::pair<std::string, std::string>> first_seen;  // normalized -> raw
    for (std::size_t i = 0; i < docs.size(); ++i) {
        const double w = weights[i] / total;
        auto prediction = generate(example.question, docs.first(i + 1), true);
        expected += w * score(metric_, prediction, example.gold_answers);
        auto key = normalize_answer(prediction);
        if (!votes.contains(key)) first_seen.emplace_back(key, prediction);
        votes[key] += w;
    }
    std::string best;
    double best_weight = -1.0;
    for (const auto& [key, raw] : first_seen) {
        if (votes[key] > best_weight) {
            best_weight = votes[key];
            best = raw;
        }
    }
    return {std::move(best), expected};
}

}  // namespace wbrag
