#pragma once

#include <string>
#include <vector>

#include "wbrag/backends.hpp"
#include "wbrag/corpus.hpp"
#include "wbrag/index.hpp"

namespace wbrag::testing {

/// n topics, one document each: "<entity> is located in <city>." The
/// question for topic i asks where its entity is located. Topics at index >=
/// n_needy are parametric, so only the first n_needy gain from retrieval.
struct TinyWorld {
    CorpusStore corpus;
    std::vector<LabeledExample> examples;
    OracleWorld world;
    std::vector<std::string> facts;
};

inline std::string tiny_word(const std::string& stem, std::size_t i) {
    static const std::string letters = "bcdfghjklmnpqrstvwxz";
    std::string w = stem;
    w += letters[i % letters.size()];
    w += letters[(i / letters.size()) % letters.size()];
    w += "o";
    return w;
}

inline TinyWorld make_tiny_world(std::size_t n, std::size_t n_needy) {
    TinyWorld t;
    for (std::size_t i = 0; i < n; ++i) {
        const auto entity = tiny_word("kar", i);
        const auto city = tiny_word("vel", i);
        const auto fact = entity + " is located in " + city + ".";
        t.corpus.add({"d" + std::to_string(i), entity, fact, Source::original, {}});
        const auto question = "Where is " + entity + " located?";
        t.examples.push_back({"ex" + std::to_string(i), question, {city}});
        t.world.answer_map[question] = {{fact}, city};
        if (i >= n_needy) t.world.parametric_facts.insert(fact);
        t.facts.push_back(fact);
    }
    return t;
}

}  // namespace wbrag::testing

namespace wbrag::testing {

/// Ten examples with gate outcomes that can be worked out by hand under the
/// oracle generator, the mock distiller and n_min = 2.
///
///   ex0-ex2  one fact document each, no parametric knowledge: selected
///   ex3-ex4  answer needs two documents, neither suffices alone: fallback
///   ex5-ex7  fact is parametric, s_nr = 1: rejected
///   ex8      fact is nowhere: s_rag = 0, rejected
///   ex9      one fact in a document, the other parametric: selected
///
/// Unit token counts (source / distilled). The mock rewrite emits
/// "Fused: <question terms>" then the extracted fact sentences.
///   ex0 16/8  ex1 13/8  ex2 15/8  ex3 26/15  ex4 18/15  ex9 14/8
struct HandFixture {
    CorpusStore corpus;
    std::vector<LabeledExample> examples;
    OracleWorld world;
    std::vector<std::string> expected_selected;
    std::vector<std::string> expected_fallback;
    std::vector<std::pair<std::size_t, std::size_t>> expected_tokens;  // per selected example
};

inline HandFixture make_hand_fixture() {
    HandFixture f;
    auto doc = [&](std::string id, std::string title, std::string text) {
        f.corpus.add({std::move(id), std::move(title), std::move(text), Source::original, {}});
    };
    doc("a0", "ardel", "ardel is located in pomer. The weather there is mild. Markets open early on most days.");
    doc("b0", "borvin", "borvin is located in quell. Few people visit. Its harbor closed long ago.");
    doc("c0", "cantor", "cantor is located in rusk. Rail lines cross the valley. Winters are long and dark.");
    doc("j0", "corva", "corva lies on the selm. Old maps show it. Barges pass in summer.");
    doc("k0", "dunet", "dunet lies on the selm. Old maps show it. Barges pass in summer.");
    doc("m0", "farrow", "farrow lies on the tane. It floods each spring.");
    doc("n0", "gellis", "gellis lies on the tane. It floods each spring.");
    doc("p0", "hollin", "hollin is located in ulm. Grain is stored there.");
    doc("p1", "istra", "istra is located in vask. Grain is stored there.");
    doc("p2", "jorum", "jorum is located in wend. Grain is stored there.");
    doc("l0", "lorin", "lorin was founded by mabel. The town is small. Its walls are mostly gone.");

    auto example = [&](std::string id, std::string question, std::vector<std::string> facts, std::string answer) {
        f.examples.push_back({std::move(id), question, {answer}});
        f.world.answer_map[question] = {std::move(facts), std::move(answer)};
    };
    example("ex0", "Where is ardel located?", {"ardel is located in pomer."}, "pomer");
    example("ex1", "Where is borvin located?", {"borvin is located in quell."}, "quell");
    example("ex2", "Where is cantor located?", {"cantor is located in rusk."}, "rusk");
    example("ex3", "Which river joins corva and dunet?", {"corva lies on the selm.", "dunet lies on the selm."}, "selm");
    example("ex4", "Which river joins farrow and gellis?", {"farrow lies on the tane.", "gellis lies on the tane."}, "tane");
    example("ex5", "Where is hollin located?", {"hollin is located in ulm."}, "ulm");
    example("ex6", "Where is istra located?", {"istra is located in vask."}, "vask");
    example("ex7", "Where is jorum located?", {"jorum is located in wend."}, "wend");
    example("ex8", "Where is kestrel located?", {"kestrel is located in yarrow."}, "yarrow");
    example("ex9", "Who founded lorin?", {"lorin was founded by mabel.", "mabel was born in zeth."}, "mabel");
    f.world.parametric_facts = {"hollin is located in ulm.", "istra is located in vask.", "jorum is located in wend.",
                                "mabel was born in zeth."};

    f.expected_selected = {"ex0", "ex1", "ex2", "ex3", "ex4", "ex9"};
    f.expected_fallback = {"ex3", "ex4"};
    f.expected_tokens = {{16, 8}, {13, 8}, {15, 8}, {26, 15}, {18, 15}, {14, 8}};
    return f;
}

}  // namespace wbrag::testing
