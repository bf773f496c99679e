#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "wbrag/backends.hpp"
#include "wbrag/config.hpp"
#include "wbrag/corpus.hpp"
#include "wbrag/pipeline.hpp"

namespace wbrag {

/// Synthetic fragmented-knowledge corpus. Each of the n_queries topics has
/// an entity, facts_per_answer fact documents (one fact sentence each plus
/// noise) and n_distractor_docs documents that share the test phrasing's
/// vocabulary but carry no fact. One train and one test question per topic.
struct SyntheticSpec {
    std::size_t n_queries = 20;
    std::size_t facts_per_answer = 3;
    std::size_t noise_sentences_per_doc = 2;
    std::size_t n_distractor_docs = 3;  // per topic
    double parametric_fraction = 0.0;
    std::uint64_t seed = 7;

    void validate() const;
    friend bool operator==(const SyntheticSpec&, const SyntheticSpec&) = default;
};

/// Keys are the field names. Unknown keys raise Error.
SyntheticSpec spec_from_key_values(const std::vector<KeyValue>& kvs);
SyntheticSpec load_spec(const std::filesystem::path& path);
std::string spec_to_text(const SyntheticSpec& spec);

struct SyntheticData {
    CorpusStore corpus;
    std::vector<LabeledExample> train;
    std::vector<LabeledExample> test;
    OracleWorld world;
    /// Per topic, in topic order: the fact sentences its answer needs.
    std::vector<std::vector<std::string>> topic_facts;
};

/// Pure function of the spec.
SyntheticData generate_synthetic(const SyntheticSpec& spec);

struct ExperimentReport {
    double baseline_score = 0.0;
    double writeback_score = 0.0;
    double gain = 0.0;
    /// Merged retrieval against an empty write-back index.
    double restored_score = 0.0;
    TrainingStats stats;
    RankHistogram histogram;
};

/// Everything a gain run produced, for inspection and persistence.
struct GainRun {
    SyntheticData data;
    TrainResult train;
    EvalResult baseline;
    EvalResult writeback;
    EvalResult restored;
    std::vector<GenerationRequest> distiller_requests;
    ExperimentReport report;
};

/// Index, baseline eval, train_kb, write-back, merged eval, all on mocks.
GainRun run_gain_experiment(const SyntheticSpec& spec, const PipelineConfig& cfg);

struct CrossRow {
    BackboneKind backbone = BackboneKind::naive;
    double no_wb = 0.0;
    double same_wb = 0.0;
    double cross_wb = 0.0;
};

/// Knowledge written back under backbone `a` and under `b`, each evaluated by
/// both backbones. Row order: a, b.
std::vector<CrossRow> run_cross_writeback(const SyntheticSpec& spec, const PipelineConfig& cfg,
                                          BackboneKind a = BackboneKind::naive,
                                          BackboneKind b = BackboneKind::weighted);

/// Ordered (parameter, values). Parameters: tau_s, tau_delta, tau_doc, n_min.
using AblationGrid = std::vector<std::pair<std::string, std::vector<double>>>;

AblationGrid grid_from_key_values(const std::vector<KeyValue>& kvs);
AblationGrid load_grid(const std::filesystem::path& path);

struct AblationRow {
    std::string param;
    double value = 0.0;
    double score = 0.0;
    TrainingStats stats;
    /// Retained ids of selected examples whose document gate did not fall back.
    std::map<std::string, std::vector<std::string>> retained;
    /// Per selected example, the unit's source token count.
    std::map<std::string, std::size_t> unit_source_tokens;

    friend bool operator==(const AblationRow&, const AblationRow&) = default;
};

/// One row per grid value, in grid order; every other threshold keeps its
/// cfg value. With use_cache, reference and document scores are computed
/// once and shared by all rows.
std::vector<AblationRow> run_ablation(const SyntheticSpec& spec, const PipelineConfig& cfg,
                                      const AblationGrid& grid, bool use_cache = true);

std::string report_csv(const ExperimentReport& report);
std::string cross_csv(const std::vector<CrossRow>& rows);
std::string ablation_csv(const std::vector<AblationRow>& rows);

/// corpus, train, test, world, units, outcomes, stats, histogram, per-example
/// eval records and report CSVs under `dir`.
void save_gain_run(const std::filesystem::path& dir, const GainRun& run);

}  // namespace wbrag
