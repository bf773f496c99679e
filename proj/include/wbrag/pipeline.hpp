#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wbrag/backbone.hpp"
#include "wbrag/backends.hpp"
#include "wbrag/corpus.hpp"
#include "wbrag/distill.hpp"
#include "wbrag/gating.hpp"
#include "wbrag/index.hpp"

namespace wbrag {

struct PipelineConfig {
    std::size_t retrieval_k = 5;
    std::size_t wb_retrieval_k = 5;
    std::size_t merged_k = 5;
    GateThresholds thresholds;
    DistillConfig distill;
    std::string dataset = "nq";
    BackboneKind backbone = BackboneKind::naive;
    double weighted_temperature = 0.1;
    std::size_t jobs = 1;

    void validate() const;
    [[nodiscard]] Backbone make_backbone(Generator& generator) const;
};

/// Generator answers task prompts; distiller serves the extract/rewrite
/// prompts; embedder encodes queries (and write-back units).
struct Backends {
    Generator& generator;
    Generator& distiller;
    Embedder& embedder;
};

struct ExampleError {
    std::string example_id;
    std::string message;

    friend bool operator==(const ExampleError&, const ExampleError&) = default;
};

struct TrainingStats {
    std::size_t n_examples = 0;
    std::size_t n_selected = 0;
    double selected_rate = 0.0;
    double mean_retained_docs = 0.0;
    double mean_source_tokens = 0.0;
    double mean_distilled_tokens = 0.0;
    double compression = 0.0;  // mean over selected examples of source/distilled
    double fallback_rate = 0.0;  // over selected examples
    std::size_t error_count = 0;

    friend bool operator==(const TrainingStats&, const TrainingStats&) = default;
};

struct RankHistogram {
    std::map<int, std::size_t> counts;
    std::map<int, double> fractions;

    friend bool operator==(const RankHistogram&, const RankHistogram&) = default;
};

/// Threshold-free scores of one training example. Ablations reuse these.
struct ExampleScores {
    std::string example_id;
    std::vector<RetrievalHit> hits;
    ScoreRecord scores;
    std::optional<std::vector<double>> doc_scores;
    std::string error;
};

struct TrainResult {
    std::vector<KnowledgeUnit> units;
    std::vector<GateOutcome> outcomes;  // every example that did not error
    std::vector<ExampleError> errors;
    TrainingStats stats;
};

/// s_nr, top-retrieval_k hits from the original index and s_rag for each
/// example. With `with_doc_scores`, every hit's standalone score as well.
std::vector<ExampleScores> score_examples(std::span<const LabeledExample> train,
                                          const CorpusStore& corpus, const VectorIndex& original_index,
                                          const Backends& backends, const PipelineConfig& cfg,
                                          bool with_doc_scores);

/// Gates, distills and aggregates from precomputed scores. Missing document
/// scores are computed for examples that pass the utility gate.
TrainResult train_from_scores(std::span<const LabeledExample> train,
                              std::span<const ExampleScores> scores, const CorpusStore& corpus,
                              const Backends& backends, const PipelineConfig& cfg);

/// Full training pass over `train`. Only the original index is searched.
TrainResult train_kb(std::span<const LabeledExample> train, const CorpusStore& corpus,
                     const VectorIndex& original_index, const Backends& backends,
                     const PipelineConfig& cfg);

TrainingStats compute_stats(std::span<const GateOutcome> outcomes,
                            std::span<const KnowledgeUnit> units, std::size_t error_count = 0);

/// Retained decisions per rank over utility-passing outcomes. Ranks 1..max
/// seen rank are always present.
RankHistogram rank_distribution(std::span<const GateOutcome> outcomes);

CorpusStore units_to_corpus(std::span<const KnowledgeUnit> units);

/// Persists `units` to units_path and indexes title + "\n" + body. Given an
/// existing index, units are appended to both the file and that index.
VectorIndex write_back(std::span<const KnowledgeUnit> units, Embedder& embedder,
                       const std::filesystem::path& units_path,
                       std::optional<VectorIndex> existing = std::nullopt);

enum class RetrievalMode { none, original, merged };

struct EvalSetup {
    const CorpusStore& corpus;
    const VectorIndex& original_index;
    const VectorIndex* writeback_index = nullptr;
    const CorpusStore* writeback_docs = nullptr;
    RetrievalMode mode = RetrievalMode::original;
};

struct EvalRecord {
    std::string example_id;
    std::string question;
    std::string prediction;
    double score = 0.0;
    std::vector<RetrievalHit> hits;
    std::string error;
};

struct EvalResult {
    double mean_score = 0.0;
    std::vector<EvalRecord> records;
    std::size_t error_count = 0;
};

/// Mean per-example score. Backend errors score 0 and are counted.
EvalResult evaluate(std::span<const LabeledExample> test, const EvalSetup& setup,
                    const Backends& backends, const PipelineConfig& cfg);

json stats_to_json(const TrainingStats& stats);
TrainingStats stats_from_json(const json& j);
std::string stats_csv(const TrainingStats& stats);
std::vector<json> histogram_records(const RankHistogram& histogram);
std::string histogram_csv(const RankHistogram& histogram);
json eval_record_to_json(const EvalRecord& record);
json hit_to_json(const RetrievalHit& hit);

/// units.jsonl, outcomes.jsonl, errors.jsonl, stats.jsonl, stats.csv,
/// histogram.jsonl, histogram.csv under `dir`.
void save_training_outputs(const std::filesystem::path& dir, const TrainResult& result);
void save_eval_records(const std::filesystem::path& path, const EvalResult& result);

}  // namespace wbrag
