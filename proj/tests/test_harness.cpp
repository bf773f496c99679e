#include <doctest.h>

#include <set>

#include "support.hpp"
#include "wbrag/config.hpp"
#include "wbrag/error.hpp"
#include "wbrag/harness.hpp"

using namespace wbrag;
using namespace wbrag::testing;

namespace {

PipelineConfig harness_cfg() {
    PipelineConfig cfg;
    cfg.thresholds.n_min = 3;
    return cfg;
}

std::size_t occurrences(const std::string& text, const std::string& needle) {
    std::size_t n = 0;
    for (auto pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1)) ++n;
    return n;
}

}  // namespace

TEST_CASE("synthetic corpus layout") {
    SyntheticSpec spec;
    spec.n_queries = 6;
    spec.facts_per_answer = 4;
    spec.n_distractor_docs = 2;
    const auto data = generate_synthetic(spec);
    CHECK(data.corpus.size() == 6 * (4 + 2));
    CHECK(data.train.size() == 6);
    CHECK(data.test.size() == 6);
    REQUIRE(data.topic_facts.size() == 6);

    std::string all_text;
    for (const auto& d : data.corpus) all_text += d.text + "\n";
    for (std::size_t t = 0; t < 6; ++t) {
        REQUIRE(data.topic_facts[t].size() == 4);
        for (const auto& fact : data.topic_facts[t]) CHECK(occurrences(all_text, fact) == 1);
        const auto& train_entry = data.world.answer_map.at(data.train[t].question);
        const auto& test_entry = data.world.answer_map.at(data.test[t].question);
        CHECK(train_entry == test_entry);
        CHECK(train_entry.required_facts == data.topic_facts[t]);
        CHECK(data.train[t].gold_answers == std::vector<std::string>{train_entry.answer});
        CHECK(data.train[t].question != data.test[t].question);
        // The answer never appears in the corpus.
        CHECK(all_text.find(train_entry.answer) == std::string::npos);
    }
    CHECK(data.world.parametric_facts.empty());
}

TEST_CASE("generation is a pure function of the spec") {
    SyntheticSpec spec;
    spec.n_queries = 5;
    const auto a = generate_synthetic(spec);
    const auto b = generate_synthetic(spec);
    CHECK(std::ranges::equal(a.corpus.documents(), b.corpus.documents()));
    CHECK(a.train == b.train);
    CHECK(a.test == b.test);
    CHECK(a.world == b.world);

    spec.seed = 8;
    const auto c = generate_synthetic(spec);
    CHECK(c.corpus.size() == a.corpus.size());
    CHECK(c.train.size() == a.train.size());
    CHECK(c.train[0].question != a.train[0].question);
}

TEST_CASE("parametric fraction") {
    SyntheticSpec spec;
    spec.n_queries = 10;
    spec.parametric_fraction = 0.3;
    const auto data = generate_synthetic(spec);
    std::size_t parametric_topics = 0;
    for (const auto& facts : data.topic_facts) {
        const bool all_known = std::ranges::all_of(facts, [&](const auto& f) { return data.world.parametric_facts.contains(f); });
        parametric_topics += all_known ? 1 : 0;
    }
    CHECK(parametric_topics == 3);
}

TEST_CASE("spec parsing") {
    const auto spec = spec_from_key_values(parse_key_values(
        "n_queries = 4\nfacts_per_answer = 2\nnoise_sentences_per_doc = 0\n"
        "n_distractor_docs = 1\nparametric_fraction = 0.5\nseed = 99\n",
        "spec"));
    CHECK(spec == SyntheticSpec{4, 2, 0, 1, 0.5, 99});
    CHECK(spec_from_key_values(parse_key_values(spec_to_text(spec), "echo")) == spec);
    CHECK_THROWS_WITH_AS(spec_from_key_values(parse_key_values("n_querys = 4\n", "spec")),
                         doctest::Contains("n_querys"), Error);
    CHECK_THROWS_AS(spec_from_key_values(parse_key_values("n_queries = 0\n", "spec")), Error);
    CHECK_THROWS_AS(spec_from_key_values(parse_key_values("parametric_fraction = 1.5\n", "spec")), Error);
}

TEST_CASE("gain experiment responds to the corpus shape") {
    SUBCASE("default shape: fragmented facts, write-back closes the gap") {
        const auto run = run_gain_experiment(SyntheticSpec{}, harness_cfg());
        CHECK(run.report.baseline_score == 0.0);
        CHECK(run.report.writeback_score == doctest::Approx(1.0));
        CHECK(run.report.restored_score == run.report.baseline_score);
        CHECK(run.report.stats.n_selected == 20);
    }
    SUBCASE("one fact per answer is found without help") {
        SyntheticSpec spec;
        spec.facts_per_answer = 1;
        spec.noise_sentences_per_doc = 0;
        const auto run = run_gain_experiment(spec, harness_cfg());
        CHECK(run.report.baseline_score == doctest::Approx(1.0));
        CHECK(run.report.gain == doctest::Approx(0.0));
    }
    SUBCASE("more facts than retrieved slots") {
        SyntheticSpec spec;
        spec.facts_per_answer = 7;
        const auto run = run_gain_experiment(spec, harness_cfg());
        CHECK(run.report.baseline_score == 0.0);
        CHECK(run.report.stats.n_selected == 0);
        CHECK(run.report.gain == 0.0);
    }
    SUBCASE("fully parametric world selects nothing") {
        SyntheticSpec spec;
        spec.parametric_fraction = 1.0;
        const auto run = run_gain_experiment(spec, harness_cfg());
        CHECK(run.train.units.empty());
        CHECK(run.report.baseline_score == doctest::Approx(1.0));
        CHECK(run.report.gain == 0.0);
    }
    SUBCASE("clean corpus: baseline already perfect") {
        SyntheticSpec spec;
        spec.noise_sentences_per_doc = 0;
        spec.n_distractor_docs = 0;
        const auto run = run_gain_experiment(spec, harness_cfg());
        CHECK(run.report.baseline_score == doctest::Approx(1.0));
        CHECK(run.report.gain == doctest::Approx(0.0));
        // Training retrieval still improves on no retrieval, so the gate selects.
        CHECK(run.report.stats.n_selected == 20);
    }
}

TEST_CASE("distiller never sees an answer") {
    const auto run = run_gain_experiment(SyntheticSpec{}, harness_cfg());
    REQUIRE_FALSE(run.distiller_requests.empty());
    std::set<std::string> answers;
    for (const auto& [q, e] : run.data.world.answer_map) answers.insert(e.answer);
    for (const auto& r : run.distiller_requests) {
        for (const auto& a : answers) {
            CHECK(r.system.find(a) == std::string::npos);
            CHECK(r.user.find(a) == std::string::npos);
        }
    }
}

TEST_CASE("cross write-back") {
    SyntheticSpec spec;
    spec.n_queries = 10;
    const auto rows = run_cross_writeback(spec, harness_cfg(), BackboneKind::naive, BackboneKind::naive);
    REQUIRE(rows.size() == 2);
    for (const auto& r : rows) {
        CHECK(r.same_wb == r.cross_wb);
        CHECK(r.same_wb > r.no_wb);
    }
    const auto mixed = run_cross_writeback(spec, harness_cfg());
    REQUIRE(mixed.size() == 2);
    CHECK(mixed[0].backbone == BackboneKind::naive);
    CHECK(mixed[1].backbone == BackboneKind::weighted);
    CHECK(cross_csv(mixed).rfind("backbone,no_wb,same_wb,cross_wb,same_delta,cross_delta\n", 0) == 0);
}

TEST_CASE("ablation grid parsing") {
    const auto grid = grid_from_key_values(parse_key_values("tau_doc = 0, 0.05\nn_min = 1,2\n", "grid"));
    REQUIRE(grid.size() == 2);
    CHECK(grid[0] == std::pair<std::string, std::vector<double>>{"tau_doc", {0.0, 0.05}});
    CHECK(grid[1].first == "n_min");
    CHECK_THROWS_AS(grid_from_key_values(parse_key_values("tau_doc = 0\ntau_doc = 1\n", "grid")), Error);
    CHECK_THROWS_AS(grid_from_key_values(parse_key_values("n_min = 1.5\n", "grid")), Error);
    CHECK_THROWS_AS(grid_from_key_values(parse_key_values("retrieval_k = 3\n", "grid")), Error);
}

TEST_CASE("ablation") {
    SyntheticSpec spec;
    spec.n_queries = 8;
    const auto cfg = harness_cfg();

    CHECK(run_ablation(spec, cfg, {}).empty());

    const AblationGrid tau_grid{{"tau_s", {0.0, 0.5, 1.0}}};
    const auto rows = run_ablation(spec, cfg, tau_grid);
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].stats.n_selected == 8);
    CHECK(rows[1].stats.n_selected == 8);
    CHECK(rows[2].stats.n_selected == 0);  // s_rag > tau_s is strict
    CHECK(rows == run_ablation(spec, cfg, tau_grid, false));

    const AblationGrid n_min_grid{{"n_min", {1, 2, 3}}};
    const auto sweep = run_ablation(spec, cfg, n_min_grid);
    REQUIRE(sweep.size() == 3);
    for (const auto& [id, tokens] : sweep[0].unit_source_tokens) {
        CHECK(tokens < sweep[1].unit_source_tokens.at(id));
        CHECK(sweep[1].unit_source_tokens.at(id) < sweep[2].unit_source_tokens.at(id));
    }
    CHECK(ablation_csv(sweep).find("n_min") != std::string::npos);

    auto parallel_cfg = cfg;
    parallel_cfg.jobs = 3;
    CHECK(run_ablation(spec, parallel_cfg, n_min_grid) == sweep);
}

TEST_CASE("gain run persistence") {
    TempDir dir;
    SyntheticSpec spec;
    spec.n_queries = 4;
    const auto run = run_gain_experiment(spec, harness_cfg());
    save_gain_run(dir.path(), run);
    for (const auto* name : {"corpus.jsonl", "train.jsonl", "test.jsonl", "world.json", "units.jsonl",
                             "stats.jsonl", "eval_baseline.jsonl", "eval_writeback.jsonl", "report.csv"}) {
        CHECK(std::filesystem::exists(dir / name));
    }
    CHECK(load_world(dir / "world.json") == run.data.world);
    CHECK(load_examples(dir / "test.jsonl") == run.data.test);
}
