#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "wbrag/backbone.hpp"
#include "wbrag/corpus.hpp"
#include "wbrag/index.hpp"
#include "wbrag/jsonl.hpp"

namespace wbrag {

struct GateThresholds {
    double tau_s = 0.1;
    double tau_delta = 0.01;
    double tau_doc = 0.01;
    std::size_t n_min = 2;

    /// n_min must lie in [1, retrieval_k].
    void validate(std::size_t retrieval_k) const;

    friend bool operator==(const GateThresholds&, const GateThresholds&) = default;
};

struct ScoreRecord {
    double s_nr = 0.0;
    double s_rag = 0.0;
    double delta = 0.0;

    static ScoreRecord from(double s_nr, double s_rag) { return {s_nr, s_rag, s_rag - s_nr}; }

    friend bool operator==(const ScoreRecord&, const ScoreRecord&) = default;
};

struct DocumentDecision {
    std::string doc_id;
    int rank = 0;
    double s_doc = 0.0;
    double margin = 0.0;  // s_doc - s_nr
    bool retained = false;

    friend bool operator==(const DocumentDecision&, const DocumentDecision&) = default;
};

struct DocumentGateResult {
    std::vector<DocumentDecision> decisions;  // one per hit, hit order
    bool fallback_used = false;
};

struct GateOutcome {
    std::string example_id;
    ScoreRecord scores;
    bool utility_passed = false;
    std::vector<DocumentDecision> doc_decisions;
    bool fallback_used = false;

    [[nodiscard]] std::vector<std::string> retained_ids() const;
    [[nodiscard]] std::size_t retained_count() const;

    friend bool operator==(const GateOutcome&, const GateOutcome&) = default;
};

/// s_nr from the parametric-only prompt, s_rag from the prompt carrying every
/// hit. Hits must come from the original index.
ScoreRecord compute_reference_scores(const LabeledExample& example, const Backbone& backbone,
                                     std::span<const RetrievalHit> hits, const CorpusStore& docs);

/// delta > tau_delta and s_rag > tau_s, both strict.
bool utility_gate(const ScoreRecord& scores, const GateThresholds& t) noexcept;

/// Standalone score of every hit: one single-document generation each.
std::vector<double> document_scores(const LabeledExample& example, std::span<const RetrievalHit> hits,
                                    const Backbone& backbone, const CorpusStore& docs);

/// Threshold step of the document gate: keep hits whose s_doc - s_nr exceeds
/// tau_doc; when none does, keep the hits ranked <= n_min instead.
DocumentGateResult decide_documents(std::span<const RetrievalHit> hits,
                                    std::span<const double> doc_scores, double s_nr,
                                    const GateThresholds& t);

DocumentGateResult document_gate(const LabeledExample& example, std::span<const RetrievalHit> hits,
                                 double s_nr, const Backbone& backbone, const CorpusStore& docs,
                                 const GateThresholds& t);

json outcome_to_json(const GateOutcome& outcome);
GateOutcome outcome_from_json(const json& j);
void save_outcomes(const std::filesystem::path& path, std::span<const GateOutcome> outcomes);
std::vector<GateOutcome> load_outcomes(const std::filesystem::path& path);

}  // namespace wbrag
