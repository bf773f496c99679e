#include "wbrag/harness.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <set>

#include <fmt/format.h>

#include "wbrag/error.hpp"
#include "wbrag/index.hpp"
#include "wbrag/metrics.hpp"
#include "wbrag/parallel.hpp"

namespace wbrag {

namespace {

constexpr std::size_t kNoisePoolSize = 24;
constexpr std::size_t kNoiseSentenceWords = 5;
constexpr std::size_t kBucketAttempts = 512;

// Words of the question templates and the distiller's unit title.
constexpr std::string_view kTemplateText = "which answer joins to and name the item for with fused";

// Pseudo-words from consonant-vowel syllables, unique across the corpus.
// While buckets remain, each embedded word also gets a mock-embedder
// coordinate of its own, so retrieval scores follow token overlap exactly.
class WordSource {
public:
    WordSource(std::uint64_t seed, std::size_t dim) : rng_(seed), dim_(dim) {
        for (const auto& t : normalized_tokens(kTemplateText)) claim(t);
    }

    std::size_t pick(std::size_t n) { return static_cast<std::size_t>(rng_() % n); }

    /// A word that will be embedded.
    std::string fresh() {
        for (std::size_t i = 0; i < kBucketAttempts && buckets_.size() < dim_; ++i) {
            auto w = candidate();
            if (!buckets_.contains(bucket(w))) {
                claim(w);
                return w;
            }
        }
        auto w = candidate();
        claim(w);
        return w;
    }

    /// A word that never reaches the embedder; it takes no bucket.
    std::string fresh_unembedded() {
        auto w = candidate();
        used_.insert(w);
        return w;
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[pick(i)]);
    }

private:
    std::size_t bucket(const std::string& w) const { return stable_hash(w) % dim_; }

    void claim(const std::string& w) {
        used_.insert(w);
        buckets_.insert(bucket(w));
    }

    std::string candidate() {
        static constexpr std::string_view kConsonants = "bdfgklmnprstvz";
        static constexpr std::string_view kVowels = "aeiou";
        while (true) {
            std::string w;
            for (int s = 0; s < 3; ++s) {
                w += kConsonants[pick(kConsonants.size())];
                w += kVowels[pick(kVowels.size())];
            }
            if (!is_stopword(w) && !used_.contains(w)) return w;
        }
    }

    std::mt19937_64 rng_;
    std::size_t dim_;
    std::set<std::string> used_;
    std::set<std::size_t> buckets_;
};

std::string noise_sentence(WordSource& words, const std::vector<std::string>& pool) {
    std::string s;
    for (std::size_t i = 0; i < kNoiseSentenceWords; ++i) {
        if (i > 0) s += ' ';
        s += pool[words.pick(pool.size())];
    }
    return s + ".";
}

// Places `core` at a random position among the noise sentences.
std::string padded_text(WordSource& words, const std::vector<std::string>& pool,
                        const std::string& core, std::size_t n_noise) {
    std::vector<std::string> sentences;
    for (std::size_t i = 0; i < n_noise; ++i) sentences.push_back(noise_sentence(words, pool));
    const auto at = words.pick(n_noise + 1);
    sentences.insert(sentences.begin() + static_cast<std::ptrdiff_t>(at), core);
    std::string text;
    for (const auto& s : sentences) {
        if (!text.empty()) text += ' ';
        text += s;
    }
    return text;
}

std::string join_values(const std::vector<std::string>& values) {
    if (values.size() == 1) return values.front();
    std::string out;
    for (std::size_t i = 0; i + 1 < values.size(); ++i) {
        if (i > 0) out += ", ";
        out += values[i];
    }
    return out + " and " + values.back();
}

struct MockStack {
    OracleGenerator generator;
    MockDistiller distiller;
    RecordingGenerator recorder{distiller};
    MockEmbedder embedder;

    explicit MockStack(const OracleWorld& world) : generator(world) {}
    Backends backends() { return {generator, recorder, embedder}; }
};

struct WritebackStore {
    CorpusStore docs;
    VectorIndex index;
};

WritebackStore build_writeback(std::span<const KnowledgeUnit> units, Embedder& embedder) {
    auto docs = units_to_corpus(units);
    auto index = build_index(docs, embedder, Source::writeback);
    return {std::move(docs), std::move(index)};
}

double evaluate_mean(std::span<const LabeledExample> test, const CorpusStore& corpus,
                     const VectorIndex& index, const WritebackStore* wb, const Backends& backends,
                     const PipelineConfig& cfg) {
    const EvalSetup setup{corpus, index, wb ? &wb->index : nullptr, wb ? &wb->docs : nullptr,
                          wb ? RetrievalMode::merged : RetrievalMode::original};
    return evaluate(test, setup, backends, cfg).mean_score;
}

const std::array<std::string_view, 4> kGridParams{"tau_s", "tau_delta", "tau_doc", "n_min"};

void apply_param(PipelineConfig& cfg, const std::string& param, double value) {
    if (param == "tau_s") {
        cfg.thresholds.tau_s = value;
    } else if (param == "tau_delta") {
        cfg.thresholds.tau_delta = value;
    } else if (param == "tau_doc") {
        cfg.thresholds.tau_doc = value;
    } else if (param == "n_min") {
        cfg.thresholds.n_min = static_cast<std::size_t>(value);
    } else {
        throw Error(fmt::format("unknown ablation parameter '{}'", param));
    }
}

}  // namespace

void SyntheticSpec::validate() const {
    if (n_queries == 0) throw Error("n_queries must be positive");
    if (facts_per_answer == 0) throw Error("facts_per_answer must be positive");
    if (!(parametric_fraction >= 0.0 && parametric_fraction <= 1.0)) {
        throw Error("parametric_fraction must lie in [0, 1]");
    }
}

SyntheticSpec spec_from_key_values(const std::vector<KeyValue>& kvs) {
    SyntheticSpec spec;
    for (const auto& kv : kvs) {
        if (kv.key == "n_queries") {
            spec.n_queries = parse_size(kv.value, kv.key);
        } else if (kv.key == "facts_per_answer") {
            spec.facts_per_answer = parse_size(kv.value, kv.key);
        } else if (kv.key == "noise_sentences_per_doc") {
            spec.noise_sentences_per_doc = parse_size(kv.value, kv.key);
        } else if (kv.key == "n_distractor_docs") {
            spec.n_distractor_docs = parse_size(kv.value, kv.key);
        } else if (kv.key == "parametric_fraction") {
            spec.parametric_fraction = parse_double(kv.value, kv.key);
        } else if (kv.key == "seed") {
            spec.seed = static_cast<std::uint64_t>(parse_size(kv.value, kv.key));
        } else {
            throw Error(fmt::format("line {}: unknown spec key '{}'", kv.line, kv.key));
        }
    }
    spec.validate();
    return spec;
}

SyntheticSpec load_spec(const std::filesystem::path& path) {
    return spec_from_key_values(load_key_values(path));
}

std::string spec_to_text(const SyntheticSpec& s) {
    return fmt::format(
        "n_queries = {}\nfacts_per_answer = {}\nnoise_sentences_per_doc = {}\n"
        "n_distractor_docs = {}\nparametric_fraction = {}\nseed = {}\n",
        s.n_queries, s.facts_per_answer, s.noise_sentences_per_doc, s.n_distractor_docs,
        s.parametric_fraction, s.seed);
}

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
    spec.validate();
    WordSource words(spec.seed, MockEmbedder::kDefaultDim);
    std::vector<std::string> pool;
    for (std::size_t i = 0; i < kNoisePoolSize; ++i) pool.push_back(words.fresh());
    std::vector<std::string> relations;
    for (std::size_t j = 0; j < spec.facts_per_answer; ++j) relations.push_back(words.fresh());

    std::vector<std::size_t> order(spec.n_queries);
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    words.shuffle(order);
    const auto n_parametric = static_cast<std::size_t>(
        std::llround(spec.parametric_fraction * static_cast<double>(spec.n_queries)));
    const std::set<std::size_t> parametric(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_parametric));

    SyntheticData data;

    auto add_doc = [&](std::string id, const std::string& title, std::string text) {
        data.corpus.add(Document{std::move(id), title, std::move(text), Source::original, {}});
    };
    for (std::size_t t = 0; t < spec.n_queries; ++t) {
        const auto topic = fmt::format("t{:03}", t);
        const auto entity = words.fresh();
        const auto answer = words.fresh_unembedded();
        const auto cue_a = words.fresh();
        const auto cue_b = words.fresh();

        std::vector<std::string> facts;
        std::vector<std::string> values;
        for (std::size_t j = 0; j < spec.facts_per_answer; ++j) {
            values.push_back(words.fresh());
            facts.push_back(fmt::format("{} {} {}.", entity, relations[j], values.back()));
            add_doc(fmt::format("{}-f{}", topic, j + 1), entity,
                    padded_text(words, pool, facts.back(), spec.noise_sentences_per_doc));
        }
        for (std::size_t j = 0; j < spec.n_distractor_docs; ++j) {
            add_doc(fmt::format("{}-d{}", topic, j + 1), entity,
                    padded_text(words, pool, fmt::format("{} {} {}.", entity, cue_a, cue_b),
                                spec.noise_sentences_per_doc));
        }

        const auto train_q = fmt::format("Which answer joins {} to {}?", entity, join_values(values));
        const auto test_q = fmt::format("Name the item for {} with {} and {}.", entity, cue_a, cue_b);
        data.train.push_back({"train-" + topic, train_q, {answer}});
        data.test.push_back({"test-" + topic, test_q, {answer}});
        data.world.answer_map[train_q] = {facts, answer};
        data.world.answer_map[test_q] = {facts, answer};
        if (parametric.contains(t)) data.world.parametric_facts.insert(facts.begin(), facts.end());
        data.topic_facts.push_back(std::move(facts));
    }
    return data;
}

GainRun run_gain_experiment(const SyntheticSpec& spec, const PipelineConfig& cfg) {
    cfg.validate();
    GainRun run;
    run.data = generate_synthetic(spec);
    const auto& data = run.data;
    MockStack mocks(data.world);
    const auto backends = mocks.backends();

    const auto index = build_index(data.corpus, mocks.embedder, Source::original);
    const EvalSetup baseline{data.corpus, index, nullptr, nullptr, RetrievalMode::original};
    run.baseline = evaluate(data.test, baseline, backends, cfg);

    run.train = train_kb(data.train, data.corpus, index, backends, cfg);
    const auto wb = build_writeback(run.train.units, mocks.embedder);
    const EvalSetup merged{data.corpus, index, &wb.index, &wb.docs, RetrievalMode::merged};
    run.writeback = evaluate(data.test, merged, backends, cfg);

    const WritebackStore empty{CorpusStore{}, VectorIndex(mocks.embedder.dim(), Source::writeback)};
    const EvalSetup restored{data.corpus, index, &empty.index, &empty.docs, RetrievalMode::merged};
    run.restored = evaluate(data.test, restored, backends, cfg);
    run.distiller_requests = mocks.recorder.requests();

    auto& r = run.report;
    r.baseline_score = run.baseline.mean_score;
    r.writeback_score = run.writeback.mean_score;
    r.gain = r.writeback_score - r.baseline_score;
    r.restored_score = run.restored.mean_score;
    r.stats = run.train.stats;
    r.histogram = rank_distribution(run.train.outcomes);
    return run;
}

std::vector<CrossRow> run_cross_writeback(const SyntheticSpec& spec, const PipelineConfig& cfg,
                                          BackboneKind a, BackboneKind b) {
    cfg.validate();
    const auto data = generate_synthetic(spec);
    MockStack mocks(data.world);
    const auto backends = mocks.backends();
    const auto index = build_index(data.corpus, mocks.embedder, Source::original);

    const std::array<BackboneKind, 2> kinds{a, b};
    std::array<PipelineConfig, 2> cfgs{cfg, cfg};
    std::vector<WritebackStore> stores;
    for (std::size_t i = 0; i < 2; ++i) {
        cfgs[i].backbone = kinds[i];
        const auto trained = train_kb(data.train, data.corpus, index, backends, cfgs[i]);
        stores.push_back(build_writeback(trained.units, mocks.embedder));
    }

    std::vector<CrossRow> rows;
    for (std::size_t i = 0; i < 2; ++i) {
        CrossRow row;
        row.backbone = kinds[i];
        row.no_wb = evaluate_mean(data.test, data.corpus, index, nullptr, backends, cfgs[i]);
        row.same_wb = evaluate_mean(data.test, data.corpus, index, &stores[i], backends, cfgs[i]);
        row.cross_wb = evaluate_mean(data.test, data.corpus, index, &stores[1 - i], backends, cfgs[i]);
        rows.push_back(row);
    }
    return rows;
}

AblationGrid grid_from_key_values(const std::vector<KeyValue>& kvs) {
    AblationGrid grid;
    for (const auto& kv : kvs) {
        if (std::find(kGridParams.begin(), kGridParams.end(), kv.key) == kGridParams.end()) {
            throw Error(fmt::format("line {}: unknown ablation parameter '{}' (expected tau_s, "
                                    "tau_delta, tau_doc or n_min)",
                                    kv.line, kv.key));
        }
        for (const auto& [param, values] : grid) {
            if (param == kv.key) throw Error(fmt::format("line {}: '{}' given twice", kv.line, kv.key));
        }
        std::vector<double> values;
        for (const auto& item : split_list(kv.value)) {
            const auto v = parse_double(item, kv.key);
            if (kv.key == "n_min" && (v < 1.0 || v != std::floor(v))) {
                throw Error(fmt::format("line {}: n_min values must be positive integers", kv.line));
            }
            values.push_back(v);
        }
        grid.emplace_back(kv.key, std::move(values));
    }
    return grid;
}

AblationGrid load_grid(const std::filesystem::path& path) {
    return grid_from_key_values(load_key_values(path));
}

std::vector<AblationRow> run_ablation(const SyntheticSpec& spec, const PipelineConfig& cfg,
                                      const AblationGrid& grid, bool use_cache) {
    cfg.validate();
    std::vector<std::pair<std::string, double>> points;
    for (const auto& [param, values] : grid) {
        for (const auto v : values) points.emplace_back(param, v);
    }
    if (points.empty()) return {};

    std::vector<PipelineConfig> point_cfgs;
    for (const auto& [param, value] : points) {
        auto c = cfg;
        apply_param(c, param, value);
        c.jobs = 1;
        c.validate();
        point_cfgs.push_back(std::move(c));
    }

    const auto data = generate_synthetic(spec);
    MockStack mocks(data.world);
    const auto backends = mocks.backends();
    const auto index = build_index(data.corpus, mocks.embedder, Source::original);

    std::vector<ExampleScores> cached;
    if (use_cache) cached = score_examples(data.train, data.corpus, index, backends, cfg, true);

    std::vector<AblationRow> rows(points.size());
    parallel_for(points.size(), cfg.jobs, [&](std::size_t p) {
        const auto& c = point_cfgs[p];
        const auto trained = use_cache
                                 ? train_from_scores(data.train, cached, data.corpus, backends, c)
                                 : train_kb(data.train, data.corpus, index, backends, c);
        const auto wb = build_writeback(trained.units, mocks.embedder);
        auto& row = rows[p];
        row.param = points[p].first;
        row.value = points[p].second;
        row.score = evaluate_mean(data.test, data.corpus, index, &wb, backends, c);
        row.stats = trained.stats;
        for (const auto& o : trained.outcomes) {
            if (o.utility_passed && !o.fallback_used) row.retained[o.example_id] = o.retained_ids();
        }
        for (const auto& u : trained.units) row.unit_source_tokens[u.source_example_id] = u.source_tokens;
    });
    return rows;
}

std::string report_csv(const ExperimentReport& r) {
    return fmt::format(
        "baseline_score,writeback_score,gain,restored_score,n_selected,selected_rate,"
        "fallback_rate,compression\n{},{},{},{},{},{},{},{}\n",
        r.baseline_score, r.writeback_score, r.gain, r.restored_score, r.stats.n_selected,
        r.stats.selected_rate, r.stats.fallback_rate, r.stats.compression);
}

std::string cross_csv(const std::vector<CrossRow>& rows) {
    std::string out = "backbone,no_wb,same_wb,cross_wb,same_delta,cross_delta\n";
    for (const auto& r : rows) {
        out += fmt::format("{},{},{},{},{},{}\n", to_string(r.backbone), r.no_wb, r.same_wb,
                           r.cross_wb, r.same_wb - r.no_wb, r.cross_wb - r.no_wb);
    }
    return out;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
    std::string out =
        "param,value,score,n_selected,selected_rate,fallback_rate,mean_retained_docs,"
        "mean_source_tokens,mean_distilled_tokens,compression\n";
    for (const auto& r : rows) {
        const auto& s = r.stats;
        out += fmt::format("{},{},{},{},{},{},{},{},{},{}\n", r.param, r.value, r.score, s.n_selected,
                           s.selected_rate, s.fallback_rate, s.mean_retained_docs,
                           s.mean_source_tokens, s.mean_distilled_tokens, s.compression);
    }
    return out;
}

void save_gain_run(const std::filesystem::path& dir, const GainRun& run) {
    save_corpus(dir / "corpus.jsonl", run.data.corpus);
    save_examples(dir / "train.jsonl", run.data.train);
    save_examples(dir / "test.jsonl", run.data.test);
    save_world(dir / "world.json", run.data.world);
    save_training_outputs(dir, run.train);
    save_eval_records(dir / "eval_baseline.jsonl", run.baseline);
    save_eval_records(dir / "eval_writeback.jsonl", run.writeback);
    write_text_file(dir / "report.csv", report_csv(run.report));
}

}  // namespace wbrag
