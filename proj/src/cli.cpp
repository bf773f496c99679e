#include "wbrag/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <functional>
#include <list>
#include <ostream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "wbrag/config.hpp"
#include "wbrag/error.hpp"
#include "wbrag/harness.hpp"
#include "wbrag/index.hpp"
#include "wbrag/parallel.hpp"

namespace wbrag {

namespace {

struct KeySpec {
    std::string name;
    std::function<void(RunConfig&, std::string_view)> set;
    std::function<std::string(const RunConfig&)> get;
};

KeySpec string_key(std::string name, std::string RunConfig::*field) {
    return {std::move(name), [field](RunConfig& c, std::string_view v) { c.*field = std::string(v); },
            [field](const RunConfig& c) { return c.*field; }};
}

template <typename Get>
KeySpec size_key(std::string name, Get ref) {
    auto key = name;
    return {std::move(name),
            [ref, key](RunConfig& c, std::string_view v) { ref(c) = parse_size(v, key); },
            [ref](const RunConfig& c) { return fmt::format("{}", ref(const_cast<RunConfig&>(c))); }};
}

template <typename Get>
KeySpec double_key(std::string name, Get ref) {
    auto key = name;
    return {std::move(name),
            [ref, key](RunConfig& c, std::string_view v) { ref(c) = parse_double(v, key); },
            [ref](const RunConfig& c) { return fmt::format("{}", ref(const_cast<RunConfig&>(c))); }};
}

template <typename Get>
KeySpec int_key(std::string name, Get ref) {
    auto key = name;
    return {std::move(name),
            [ref, key](RunConfig& c, std::string_view v) { ref(c) = static_cast<int>(parse_int(v, key)); },
            [ref](const RunConfig& c) { return fmt::format("{}", ref(const_cast<RunConfig&>(c))); }};
}

// Settings shared by both endpoints are written to both and read from the
// chat endpoint.
template <typename Field>
KeySpec endpoint_key(std::string name, Field EndpointConfig::*field) {
    auto key = name;
    return {std::move(name),
            [field, key](RunConfig& c, std::string_view v) {
                Field value{};
                if constexpr (std::is_same_v<Field, double>) {
                    value = parse_double(v, key);
                } else if constexpr (std::is_same_v<Field, int>) {
                    value = static_cast<int>(parse_int(v, key));
                } else {
                    value = parse_size(v, key);
                }
                c.llm.*field = value;
                c.embedding.*field = value;
            },
            [field](const RunConfig& c) { return fmt::format("{}", c.llm.*field); }};
}

const std::vector<KeySpec>& key_table() {
    static const std::vector<KeySpec> table = [] {
        std::vector<KeySpec> t;
        t.push_back(string_key("corpus", &RunConfig::corpus));
        t.push_back(string_key("train", &RunConfig::train));
        t.push_back(string_key("test", &RunConfig::test));
        t.push_back(string_key("index", &RunConfig::index));
        t.push_back(string_key("out", &RunConfig::out));
        t.push_back(string_key("world", &RunConfig::world));
        t.push_back(string_key("wb_dir", &RunConfig::wb_dir));
        t.push_back(string_key("spec", &RunConfig::spec));
        t.push_back(string_key("grid", &RunConfig::grid));
        t.push_back({"dataset",
                     [](RunConfig& c, std::string_view v) {
                         (void)metric_for_dataset(v);
                         c.pipeline.dataset = std::string(v);
                     },
                     [](const RunConfig& c) { return c.pipeline.dataset; }});
        t.push_back({"backbone",
                     [](RunConfig& c, std::string_view v) { c.pipeline.backbone = backbone_from_string(v); },
                     [](const RunConfig& c) { return std::string(to_string(c.pipeline.backbone)); }});
        t.push_back(size_key("retrieval_k", [](RunConfig& c) -> auto& { return c.pipeline.retrieval_k; }));
        t.push_back(size_key("wb_retrieval_k", [](RunConfig& c) -> auto& { return c.pipeline.wb_retrieval_k; }));
        t.push_back(size_key("merged_k", [](RunConfig& c) -> auto& { return c.pipeline.merged_k; }));
        t.push_back(double_key("tau_s", [](RunConfig& c) -> auto& { return c.pipeline.thresholds.tau_s; }));
        t.push_back(double_key("tau_delta", [](RunConfig& c) -> auto& { return c.pipeline.thresholds.tau_delta; }));
        t.push_back(double_key("tau_doc", [](RunConfig& c) -> auto& { return c.pipeline.thresholds.tau_doc; }));
        t.push_back(size_key("n_min", [](RunConfig& c) -> auto& { return c.pipeline.thresholds.n_min; }));
        t.push_back(size_key("extractive_max_sentences",
                             [](RunConfig& c) -> auto& { return c.pipeline.distill.extractive_max_sentences; }));
        t.push_back(size_key("fallback_selected_sentences",
                             [](RunConfig& c) -> auto& { return c.pipeline.distill.fallback_selected_sentences; }));
        t.push_back(int_key("max_new_tokens", [](RunConfig& c) -> auto& { return c.pipeline.distill.max_new_tokens; }));
        t.push_back(double_key("temperature", [](RunConfig& c) -> auto& { return c.pipeline.distill.temperature; }));
        t.push_back(double_key("weighted_temperature",
                               [](RunConfig& c) -> auto& { return c.pipeline.weighted_temperature; }));
        t.push_back(string_key("generator", &RunConfig::generator));
        t.push_back(string_key("distiller", &RunConfig::distiller));
        t.push_back(string_key("embedder", &RunConfig::embedder));
        t.push_back({"llm_base_url", [](RunConfig& c, std::string_view v) { c.llm.base_url = std::string(v); },
                     [](const RunConfig& c) { return c.llm.base_url; }});
        t.push_back({"llm_model", [](RunConfig& c, std::string_view v) { c.llm.model = std::string(v); },
                     [](const RunConfig& c) { return c.llm.model; }});
        t.push_back({"embed_base_url",
                     [](RunConfig& c, std::string_view v) { c.embedding.base_url = std::string(v); },
                     [](const RunConfig& c) { return c.embedding.base_url; }});
        t.push_back({"embed_model", [](RunConfig& c, std::string_view v) { c.embedding.model = std::string(v); },
                     [](const RunConfig& c) { return c.embedding.model; }});
        t.push_back(string_key("api_key_env", &RunConfig::api_key_env));
        t.push_back(endpoint_key("timeout_seconds", &EndpointConfig::timeout_seconds));
        t.push_back(endpoint_key("max_retries", &EndpointConfig::max_retries));
        t.push_back(endpoint_key("backoff_ms", &EndpointConfig::backoff_ms));
        t.push_back(endpoint_key("max_in_flight", &EndpointConfig::max_in_flight));
        t.push_back(endpoint_key("batch_size", &EndpointConfig::batch_size));
        t.push_back(size_key("jobs", [](RunConfig& c) -> auto& { return c.pipeline.jobs; }));
        return t;
    }();
    return table;
}

std::string require(const std::string& value, std::string_view key) {
    if (value.empty()) {
        throw Error(fmt::format("missing required setting '{}' (flag or config key)", key));
    }
    return value;
}

std::filesystem::path index_file(const std::string& path) {
    const std::filesystem::path p(path);
    return std::filesystem::is_directory(p) ? p / "index.jsonl" : p;
}

EndpointConfig with_api_key(EndpointConfig endpoint, const RunConfig& cfg) {
    if (const char* key = std::getenv(cfg.api_key_env.c_str()); key != nullptr) endpoint.api_key = key;
    return endpoint;
}

void write_config(const std::filesystem::path& dir, const RunConfig& cfg) {
    write_text_file(dir / "config.txt", config_echo(cfg));
}

std::string stats_line(const TrainingStats& s) {
    return fmt::format(
        "examples {} selected {} (rate {}) fallback_rate {} mean_retained {} compression {} errors {}",
        s.n_examples, s.n_selected, s.selected_rate, s.fallback_rate, s.mean_retained_docs,
        s.compression, s.error_count);
}

int cmd_index(RunConfig& cfg, std::ostream& out) {
    const auto corpus = load_corpus(require(cfg.corpus, "corpus"));
    const std::filesystem::path dir = require(cfg.out, "out");
    auto embedder = make_embedder(cfg);
    const auto index = build_index(corpus, *embedder, Source::original, cfg.embedding.batch_size);
    index.save(dir / "index.jsonl");
    write_config(dir, cfg);
    out << fmt::format("indexed {} documents into {}\n", index.size(), (dir / "index.jsonl").string());
    return 0;
}

int cmd_train(RunConfig& cfg, std::ostream& out) {
    cfg.pipeline.validate();
    const auto corpus = load_corpus(require(cfg.corpus, "corpus"));
    const auto index = VectorIndex::load(index_file(require(cfg.index, "index")));
    const auto train = load_examples(require(cfg.train, "train"));
    const std::filesystem::path dir = require(cfg.out, "out");
    auto generator = make_generator(cfg);
    auto distiller = make_distiller(cfg);
    auto embedder = make_embedder(cfg);
    const Backends backends{*generator, *distiller, *embedder};

    const auto result = train_kb(train, corpus, index, backends, cfg.pipeline);
    save_training_outputs(dir, result);
    const auto wb = build_index(units_to_corpus(result.units), *embedder, Source::writeback,
                                cfg.embedding.batch_size);
    wb.save(dir / "wb_index.jsonl");
    write_config(dir, cfg);
    out << stats_line(result.stats) << "\n";
    return 0;
}

int cmd_eval(RunConfig& cfg, std::ostream& out) {
    cfg.pipeline.validate();
    const auto corpus = load_corpus(require(cfg.corpus, "corpus"));
    const auto index = VectorIndex::load(index_file(require(cfg.index, "index")));
    const auto test = load_examples(require(cfg.test, "test"));
    const std::filesystem::path dir = require(cfg.out, "out");
    auto generator = make_generator(cfg);
    auto distiller = make_distiller(cfg);
    auto embedder = make_embedder(cfg);
    const Backends backends{*generator, *distiller, *embedder};

    std::optional<CorpusStore> wb_docs;
    std::optional<VectorIndex> wb_index;
    if (!cfg.wb_dir.empty()) {
        const std::filesystem::path wb_dir = cfg.wb_dir;
        wb_docs = units_to_corpus(load_units(wb_dir / "units.jsonl"));
        wb_index = VectorIndex::load(wb_dir / "wb_index.jsonl");
    }
    const EvalSetup setup{corpus, index, wb_index ? &*wb_index : nullptr, wb_docs ? &*wb_docs : nullptr,
                          wb_index ? RetrievalMode::merged : RetrievalMode::original};
    const auto result = evaluate(test, setup, backends, cfg.pipeline);
    save_eval_records(dir / "eval.jsonl", result);
    write_text_file(dir / "score.txt", fmt::format("{}\n", result.mean_score));
    write_config(dir, cfg);
    out << fmt::format("score {} over {} examples ({} errors)\n", result.mean_score,
                       result.records.size(), result.error_count);
    return 0;
}

int cmd_simulate(RunConfig& cfg, std::ostream& out) {
    const auto spec = load_spec(require(cfg.spec, "spec"));
    const std::filesystem::path dir = require(cfg.out, "out");
    const auto run = run_gain_experiment(spec, cfg.pipeline);
    save_gain_run(dir, run);
    const auto cross = run_cross_writeback(spec, cfg.pipeline);
    write_text_file(dir / "cross.csv", cross_csv(cross));
    write_text_file(dir / "spec.txt", spec_to_text(spec));
    write_config(dir, cfg);
    const auto& r = run.report;
    out << fmt::format("baseline {} writeback {} gain {}\n", r.baseline_score, r.writeback_score, r.gain);
    out << stats_line(r.stats) << "\n";
    return 0;
}

int cmd_ablate(RunConfig& cfg, std::ostream& out) {
    const auto spec = load_spec(require(cfg.spec, "spec"));
    const auto grid = load_grid(require(cfg.grid, "grid"));
    const std::filesystem::path dir = require(cfg.out, "out");
    const auto rows = run_ablation(spec, cfg.pipeline, grid, true);
    std::vector<json> records;
    for (const auto& r : rows) {
        records.push_back({{"param", r.param}, {"value", r.value}, {"score", r.score},
                           {"stats", stats_to_json(r.stats)}, {"retained", r.retained}});
    }
    write_records(dir / "ablation.jsonl", records);
    write_text_file(dir / "ablation.csv", ablation_csv(rows));
    write_text_file(dir / "spec.txt", spec_to_text(spec));
    write_config(dir, cfg);
    out << fmt::format("{} ablation rows written to {}\n", rows.size(), (dir / "ablation.csv").string());
    return 0;
}

int cmd_stats(const std::filesystem::path& run_dir, std::ostream& out, std::ostream& err) {
    const auto units = load_units(run_dir / "units.jsonl");
    const auto outcomes = load_outcomes(run_dir / "outcomes.jsonl");
    std::size_t errors = 0;
    if (std::filesystem::exists(run_dir / "errors.jsonl")) {
        for_each_record(run_dir / "errors.jsonl", [&](std::size_t, const json&) { ++errors; });
    }
    const auto computed = compute_stats(outcomes, units, errors);
    std::optional<TrainingStats> stored;
    for_each_record(run_dir / "stats.jsonl", [&](std::size_t, const json& j) {
        if (!stored) stored = stats_from_json(j);
    });
    out << stats_to_json(computed).dump(2) << "\n";
    if (!stored) {
        err << "error: " << (run_dir / "stats.jsonl").string() << " holds no record\n";
        return 1;
    }
    if (*stored != computed) {
        err << "error: stored stats differ from recomputed stats: " << stats_to_json(*stored).dump() << "\n";
        return 1;
    }
    return 0;
}

}  // namespace

const std::vector<std::string>& config_keys() {
    static const std::vector<std::string> keys = [] {
        std::vector<std::string> k;
        for (const auto& spec : key_table()) k.push_back(spec.name);
        return k;
    }();
    return keys;
}

bool apply_config_key(RunConfig& cfg, std::string_view key, std::string_view value) {
    for (const auto& spec : key_table()) {
        if (spec.name == key) {
            spec.set(cfg, value);
            return true;
        }
    }
    return false;
}

std::string config_echo(const RunConfig& cfg) {
    std::string out;
    for (const auto& spec : key_table()) {
        if (spec.name == "jobs") continue;
        out += fmt::format("{} = {}\n", spec.name, spec.get(cfg));
    }
    return out;
}

std::unique_ptr<Generator> make_generator(const RunConfig& cfg) {
    if (cfg.generator == "oracle") {
        return std::make_unique<OracleGenerator>(load_world(require(cfg.world, "world")));
    }
    if (cfg.generator == "http") return std::make_unique<ChatClient>(with_api_key(cfg.llm, cfg));
    throw Error(fmt::format("unknown generator '{}' (expected oracle or http)", cfg.generator));
}

std::unique_ptr<Generator> make_distiller(const RunConfig& cfg) {
    if (cfg.distiller == "mock") return std::make_unique<MockDistiller>();
    if (cfg.distiller == "http") return std::make_unique<ChatClient>(with_api_key(cfg.llm, cfg));
    throw Error(fmt::format("unknown distiller '{}' (expected mock or http)", cfg.distiller));
}

std::unique_ptr<Embedder> make_embedder(const RunConfig& cfg) {
    if (cfg.embedder == "mock") return std::make_unique<MockEmbedder>();
    if (cfg.embedder == "http") return std::make_unique<HttpEmbedder>(with_api_key(cfg.embedding, cfg));
    throw Error(fmt::format("unknown embedder '{}' (expected mock or http)", cfg.embedder));
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Knowledge-base training for retrieval-augmented generation", "wbrag"};
    app.require_subcommand(1);

    struct Binding {
        std::string key;
        std::string value;
        CLI::Option* option = nullptr;
    };
    std::list<Binding> bindings;
    std::string config_path;
    std::size_t jobs = 0;  // 0: not given on the command line
    std::vector<std::string> overrides;
    std::string run_dir;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "Flat key = value config file");
        sub->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);
        sub->add_option("--set", overrides, "Override any config key: key=value");
    };
    auto bind = [&](CLI::App* sub, const std::string& flag, const std::string& key, const std::string& help) {
        auto& b = bindings.emplace_back(Binding{key, {}, nullptr});
        b.option = sub->add_option(flag, b.value, help);
    };

    auto* index = app.add_subcommand("index", "Embed a corpus and persist the original index");
    common(index);
    bind(index, "--corpus", "corpus", "Corpus records");
    bind(index, "--out", "out", "Output directory");
    bind(index, "--embedder", "embedder", "mock or http");

    auto* train = app.add_subcommand("train", "Gate, distill and write back knowledge units");
    common(train);
    bind(train, "--corpus", "corpus", "Corpus records");
    bind(train, "--index", "index", "Original index file or directory");
    bind(train, "--train", "train", "Labeled training examples");
    bind(train, "--out", "out", "Output directory");
    bind(train, "--world", "world", "Oracle world for the oracle generator");
    bind(train, "--tau-s", "tau_s", "Utility threshold on s_rag");
    bind(train, "--tau-delta", "tau_delta", "Utility threshold on s_rag - s_nr");
    bind(train, "--tau-doc", "tau_doc", "Document gate margin");
    bind(train, "--n-min", "n_min", "Fallback document count");
    bind(train, "--backbone", "backbone", "naive or weighted");
    bind(train, "--dataset", "dataset", "Dataset name selecting the metric");
    bind(train, "--embedder", "embedder", "mock or http");

    auto* eval = app.add_subcommand("eval", "Score a test set with or without write-back");
    common(eval);
    bind(eval, "--corpus", "corpus", "Corpus records");
    bind(eval, "--index", "index", "Original index file or directory");
    bind(eval, "--test", "test", "Labeled test examples");
    bind(eval, "--wb-dir", "wb_dir", "Training output directory to merge in");
    bind(eval, "--dataset", "dataset", "Dataset name selecting the metric");
    bind(eval, "--out", "out", "Output directory");
    bind(eval, "--world", "world", "Oracle world for the oracle generator");
    bind(eval, "--backbone", "backbone", "naive or weighted");
    bind(eval, "--embedder", "embedder", "mock or http");

    auto* simulate = app.add_subcommand("simulate", "Synthetic write-back gain and transfer experiment");
    common(simulate);
    bind(simulate, "--spec", "spec", "Synthetic spec file");
    bind(simulate, "--out", "out", "Output directory");

    auto* ablate = app.add_subcommand("ablate", "Threshold sweep on a synthetic spec");
    common(ablate);
    bind(ablate, "--spec", "spec", "Synthetic spec file");
    bind(ablate, "--grid", "grid", "Grid file: param = v1, v2, ...");
    bind(ablate, "--out", "out", "Output directory");

    auto* stats = app.add_subcommand("stats", "Recompute training statistics from a run directory");
    stats->add_option("--run", run_dir, "Training output directory")->required();

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err);
    }

    try {
        if (stats->parsed()) return cmd_stats(run_dir, out, err);

        RunConfig cfg;
        cfg.pipeline.jobs = default_jobs();
        if (!config_path.empty()) {
            for (const auto& kv : load_key_values(config_path)) {
                if (!apply_config_key(cfg, kv.key, kv.value)) {
                    err << fmt::format("warning: {}:{}: unknown config key '{}'\n", config_path, kv.line, kv.key);
                }
            }
        }
        for (const auto& o : overrides) {
            const auto eq = o.find('=');
            if (eq == std::string::npos) throw Error(fmt::format("--set expects key=value, got '{}'", o));
            const auto key = trim(std::string_view(o).substr(0, eq));
            if (!apply_config_key(cfg, key, trim(std::string_view(o).substr(eq + 1)))) {
                throw Error(fmt::format("--set: unknown config key '{}'", key));
            }
        }
        for (const auto& b : bindings) {
            if (b.option->count() > 0) apply_config_key(cfg, b.key, b.value);
        }
        if (jobs > 0) cfg.pipeline.jobs = jobs;

        if (index->parsed()) return cmd_index(cfg, out);
        if (train->parsed()) return cmd_train(cfg, out);
        if (eval->parsed()) return cmd_eval(cfg, out);
        if (simulate->parsed()) return cmd_simulate(cfg, out);
        if (ablate->parsed()) return cmd_ablate(cfg, out);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}

}  // namespace wbrag
