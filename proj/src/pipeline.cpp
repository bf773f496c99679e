#include "wbrag/pipeline.hpp"

#include <fmt/format.h>

#include "wbrag/error.hpp"
#include "wbrag/metrics.hpp"
#include "wbrag/parallel.hpp"

namespace wbrag {

namespace {

EmbeddingVector embed_query(Embedder& embedder, const std::string& question) {
    auto vectors = embedder.embed(std::span<const std::string>(&question, 1));
    if (vectors.size() != 1) throw BackendError("embedder returned no vector for the query");
    return std::move(vectors.front());
}

std::vector<double> hit_scores(std::span<const RetrievalHit> hits) {
    std::vector<double> out;
    out.reserve(hits.size());
    for (const auto& h : hits) out.push_back(h.score);
    return out;
}

double safe_div(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

struct ExampleResult {
    std::optional<GateOutcome> outcome;
    std::optional<KnowledgeUnit> unit;
    std::optional<ExampleError> error;
};

}  // namespace

void PipelineConfig::validate() const {
    if (retrieval_k == 0 || wb_retrieval_k == 0 || merged_k == 0) {
        throw Error("retrieval top-k values must be positive");
    }
    if (merged_k > retrieval_k + wb_retrieval_k) {
        throw Error(fmt::format("merged_k ({}) exceeds retrieval_k + wb_retrieval_k ({})", merged_k,
                                retrieval_k + wb_retrieval_k));
    }
    thresholds.validate(retrieval_k);
    distill.validate();
    (void)metric_for_dataset(dataset);
    if (!(weighted_temperature > 0.0)) throw Error("weighted_temperature must be positive");
}

Backbone PipelineConfig::make_backbone(Generator& generator) const {
    return Backbone(generator, {backbone, dataset, weighted_temperature, distill.max_new_tokens,
                                distill.temperature});
}

std::vector<ExampleScores> score_examples(std::span<const LabeledExample> train,
                                          const CorpusStore& corpus, const VectorIndex& original_index,
                                          const Backends& backends, const PipelineConfig& cfg,
                                          bool with_doc_scores) {
    cfg.validate();
    const auto backbone = cfg.make_backbone(backends.generator);
    std::vector<ExampleScores> out(train.size());
    parallel_for(train.size(), cfg.jobs, [&](std::size_t i) {
        const auto& ex = train[i];
        auto& slot = out[i];
        slot.example_id = ex.id;
        try {
            const auto query = embed_query(backends.embedder, ex.question);
            slot.hits = original_index.search(query, cfg.retrieval_k);
            slot.scores = compute_reference_scores(ex, backbone, slot.hits, corpus);
            if (with_doc_scores) {
                slot.doc_scores = document_scores(ex, slot.hits, backbone, corpus);
            }
        } catch (const std::exception& e) {
            slot.error = e.what();
        }
    });
    return out;
}

TrainResult train_from_scores(std::span<const LabeledExample> train,
                              std::span<const ExampleScores> scores, const CorpusStore& corpus,
                              const Backends& backends, const PipelineConfig& cfg) {
    cfg.validate();
    if (scores.size() != train.size()) throw Error("train_from_scores: one score record per example");
    const auto backbone = cfg.make_backbone(backends.generator);

    std::vector<ExampleResult> results(train.size());
    parallel_for(train.size(), cfg.jobs, [&](std::size_t i) {
        const auto& ex = train[i];
        const auto& sc = scores[i];
        auto& res = results[i];
        if (!sc.error.empty()) {
            res.error = ExampleError{ex.id, sc.error};
            return;
        }
        try {
            GateOutcome outcome;
            outcome.example_id = ex.id;
            outcome.scores = sc.scores;
            outcome.utility_passed = utility_gate(sc.scores, cfg.thresholds);
            if (outcome.utility_passed && !sc.hits.empty()) {
                const auto doc_scores = sc.doc_scores ? *sc.doc_scores
                                                      : document_scores(ex, sc.hits, backbone, corpus);
                auto gate = decide_documents(sc.hits, doc_scores, sc.scores.s_nr, cfg.thresholds);
                outcome.doc_decisions = std::move(gate.decisions);
                outcome.fallback_used = gate.fallback_used;

                std::vector<Document> retained;
                for (const auto& d : outcome.doc_decisions) {
                    if (d.retained) retained.push_back(corpus.get(d.doc_id));
                }
                auto unit = distill(ex.question, ex.id, retained, backends.distiller, cfg.distill);
                unit.fallback_used = outcome.fallback_used;
                res.unit = std::move(unit);
            } else {
                outcome.utility_passed = false;
            }
            res.outcome = std::move(outcome);
        } catch (const std::exception& e) {
            res.error = ExampleError{ex.id, e.what()};
        }
    });

    TrainResult out;
    for (auto& r : results) {
        if (r.error) {
            out.errors.push_back(std::move(*r.error));
            continue;
        }
        out.outcomes.push_back(std::move(*r.outcome));
        if (r.unit) out.units.push_back(std::move(*r.unit));
    }
    out.stats = compute_stats(out.outcomes, out.units, out.errors.size());
    return out;
}

TrainResult train_kb(std::span<const LabeledExample> train, const CorpusStore& corpus,
                     const VectorIndex& original_index, const Backends& backends,
                     const PipelineConfig& cfg) {
    const auto scores = score_examples(train, corpus, original_index, backends, cfg, false);
    return train_from_scores(train, scores, corpus, backends, cfg);
}

TrainingStats compute_stats(std::span<const GateOutcome> outcomes,
                            std::span<const KnowledgeUnit> units, std::size_t error_count) {
    TrainingStats s;
    s.error_count = error_count;
    s.n_examples = outcomes.size() + error_count;
    std::size_t fallback = 0;
    double retained = 0.0;
    for (const auto& o : outcomes) {
        if (!o.utility_passed) continue;
        ++s.n_selected;
        fallback += o.fallback_used ? 1 : 0;
        retained += static_cast<double>(o.retained_count());
    }
    if (s.n_selected != units.size()) {
        throw Error(fmt::format("compute_stats: {} selected outcomes but {} units", s.n_selected,
                                units.size()));
    }
    double source = 0.0;
    double distilled = 0.0;
    double ratios = 0.0;
    for (const auto& u : units) {
        source += static_cast<double>(u.source_tokens);
        distilled += static_cast<double>(u.distilled_tokens);
        ratios += safe_div(static_cast<double>(u.source_tokens), static_cast<double>(u.distilled_tokens));
    }
    const auto n = static_cast<double>(s.n_selected);
    s.selected_rate = safe_div(n, static_cast<double>(s.n_examples));
    s.mean_retained_docs = safe_div(retained, n);
    s.mean_source_tokens = safe_div(source, n);
    s.mean_distilled_tokens = safe_div(distilled, n);
    s.compression = safe_div(ratios, n);
    s.fallback_rate = safe_div(static_cast<double>(fallback), n);
    return s;
}

RankHistogram rank_distribution(std::span<const GateOutcome> outcomes) {
    RankHistogram h;
    int max_rank = 0;
    std::size_t total = 0;
    for (const auto& o : outcomes) {
        if (!o.utility_passed) continue;
        for (const auto& d : o.doc_decisions) {
            max_rank = std::max(max_rank, d.rank);
            if (d.retained) {
                ++h.counts[d.rank];
                ++total;
            }
        }
    }
    for (int r = 1; r <= max_rank; ++r) h.counts.try_emplace(r, 0);
    for (const auto& [rank, count] : h.counts) {
        h.fractions[rank] = safe_div(static_cast<double>(count), static_cast<double>(total));
    }
    return h;
}

CorpusStore units_to_corpus(std::span<const KnowledgeUnit> units) {
    CorpusStore store;
    for (const auto& u : units) store.add(u.to_document());
    return store;
}

VectorIndex write_back(std::span<const KnowledgeUnit> units, Embedder& embedder,
                       const std::filesystem::path& units_path, std::optional<VectorIndex> existing) {
    std::vector<Document> docs;
    docs.reserve(units.size());
    for (const auto& u : units) docs.push_back(u.to_document());

    VectorIndex index = existing ? std::move(*existing) : VectorIndex(embedder.dim(), Source::writeback);
    if (index.label() != Source::writeback) throw Error("write_back: index is not a write-back index");
    append_documents(index, docs, embedder);
    if (existing) {
        append_units(units_path, units);
    } else {
        save_units(units_path, units);
    }
    return index;
}

EvalResult evaluate(std::span<const LabeledExample> test, const EvalSetup& setup,
                    const Backends& backends, const PipelineConfig& cfg) {
    cfg.validate();
    if (setup.mode == RetrievalMode::merged &&
        (setup.writeback_index == nullptr || setup.writeback_docs == nullptr)) {
        throw Error("merged evaluation needs a write-back index and its documents");
    }
    if (setup.writeback_docs != nullptr) {
        for (const auto& d : *setup.writeback_docs) {
            if (setup.corpus.find(d.id) != nullptr) {
                throw Error(fmt::format("write-back id '{}' collides with an original document", d.id));
            }
        }
    }
    const auto backbone = cfg.make_backbone(backends.generator);

    EvalResult result;
    result.records.resize(test.size());
    parallel_for(test.size(), cfg.jobs, [&](std::size_t i) {
        const auto& ex = test[i];
        auto& rec = result.records[i];
        rec.example_id = ex.id;
        rec.question = ex.question;
        try {
            BackboneAnswer answer;
            if (setup.mode == RetrievalMode::none) {
                answer = backbone.without_retrieval(ex);
            } else {
                const auto query = embed_query(backends.embedder, ex.question);
                rec.hits = setup.mode == RetrievalMode::merged
                               ? merged_search(setup.original_index, *setup.writeback_index, query,
                                               cfg.retrieval_k, cfg.wb_retrieval_k, cfg.merged_k)
                               : setup.original_index.search(query, cfg.retrieval_k);
                const auto docs = resolve_hits(rec.hits, setup.corpus, setup.writeback_docs);
                answer = backbone.with_documents(ex, docs, hit_scores(rec.hits));
            }
            rec.prediction = std::move(answer.prediction);
            rec.score = answer.score;
        } catch (const std::exception& e) {
            rec.error = e.what();
            rec.score = 0.0;
        }
    });
    double total = 0.0;
    for (const auto& r : result.records) {
        total += r.score;
        result.error_count += r.error.empty() ? 0 : 1;
    }
    result.mean_score = safe_div(total, static_cast<double>(test.size()));
    return result;
}

json stats_to_json(const TrainingStats& s) {
    return {{"n_examples", s.n_examples},
            {"n_selected", s.n_selected},
            {"selected_rate", s.selected_rate},
            {"mean_retained_docs", s.mean_retained_docs},
            {"mean_source_tokens", s.mean_source_tokens},
            {"mean_distilled_tokens", s.mean_distilled_tokens},
            {"compression", s.compression},
            {"fallback_rate", s.fallback_rate},
            {"error_count", s.error_count}};
}

TrainingStats stats_from_json(const json& j) {
    TrainingStats s;
    try {
        s.n_examples = j.at("n_examples").get<std::size_t>();
        s.n_selected = j.at("n_selected").get<std::size_t>();
        s.selected_rate = j.at("selected_rate").get<double>();
        s.mean_retained_docs = j.at("mean_retained_docs").get<double>();
        s.mean_source_tokens = j.at("mean_source_tokens").get<double>();
        s.mean_distilled_tokens = j.at("mean_distilled_tokens").get<double>();
        s.compression = j.at("compression").get<double>();
        s.fallback_rate = j.at("fallback_rate").get<double>();
        s.error_count = j.at("error_count").get<std::size_t>();
    } catch (const json::exception& e) {
        throw Error(fmt::format("malformed stats record: {}", e.what()));
    }
    return s;
}

std::string stats_csv(const TrainingStats& s) {
    return fmt::format(
        "n_examples,n_selected,selected_rate,mean_retained_docs,mean_source_tokens,"
        "mean_distilled_tokens,compression,fallback_rate,error_count\n"
        "{},{},{},{},{},{},{},{},{}\n",
        s.n_examples, s.n_selected, s.selected_rate, s.mean_retained_docs, s.mean_source_tokens,
        s.mean_distilled_tokens, s.compression, s.fallback_rate, s.error_count);
}

std::vector<json> histogram_records(const RankHistogram& h) {
    std::vector<json> out;
    for (const auto& [rank, count] : h.counts) {
        out.push_back({{"rank", rank}, {"count", count}, {"fraction", h.fractions.at(rank)}});
    }
    return out;
}

std::string histogram_csv(const RankHistogram& h) {
    std::string out = "rank,count,fraction\n";
    for (const auto& [rank, count] : h.counts) {
        out += fmt::format("{},{},{}\n", rank, count, h.fractions.at(rank));
    }
    return out;
}

json hit_to_json(const RetrievalHit& hit) {
    return {{"doc_id", hit.doc_id},
            {"score", hit.score},
            {"rank", hit.rank},
            {"source", to_string(hit.source)}};
}

json eval_record_to_json(const EvalRecord& r) {
    json hits = json::array();
    for (const auto& h : r.hits) hits.push_back(hit_to_json(h));
    json j = {{"example_id", r.example_id}, {"question", r.question}, {"prediction", r.prediction},
              {"score", r.score},           {"hits", hits}};
    if (!r.error.empty()) j["error"] = r.error;
    return j;
}

void save_training_outputs(const std::filesystem::path& dir, const TrainResult& result) {
    save_units(dir / "units.jsonl", result.units);
    save_outcomes(dir / "outcomes.jsonl", result.outcomes);
    std::vector<json> errors;
    for (const auto& e : result.errors) {
        errors.push_back({{"example_id", e.example_id}, {"error", e.message}});
    }
    write_records(dir / "errors.jsonl", errors);
    const std::vector<json> stats{stats_to_json(result.stats)};
    write_records(dir / "stats.jsonl", stats);
    write_text_file(dir / "stats.csv", stats_csv(result.stats));
    const auto histogram = rank_distribution(result.outcomes);
    write_records(dir / "histogram.jsonl", histogram_records(histogram));
    write_text_file(dir / "histogram.csv", histogram_csv(histogram));
}

void save_eval_records(const std::filesystem::path& path, const EvalResult& result) {
    std::vector<json> records;
    records.reserve(result.records.size());
    for (const auto& r : result.records) records.push_back(eval_record_to_json(r));
    write_records(path, records);
}

}  // namespace wbrag
