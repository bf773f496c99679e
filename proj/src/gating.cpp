#include "wbrag/gating.hpp"

#include <fmt/format.h>

#include "wbrag/error.hpp"

namespace wbrag {

void GateThresholds::validate(std::size_t retrieval_k) const {
    if (n_min < 1) throw Error("n_min must be at least 1");
    if (n_min > retrieval_k) {
        throw Error(fmt::format("n_min ({}) must not exceed retrieval top-k ({})", n_min, retrieval_k));
    }
    if (tau_s < 0.0 || tau_s > 1.0) throw Error(fmt::format("tau_s must lie in [0, 1], got {}", tau_s));
}

std::vector<std::string> GateOutcome::retained_ids() const {
    std::vector<std::string> ids;
    for (const auto& d : doc_decisions) {
        if (d.retained) ids.push_back(d.doc_id);
    }
    return ids;
}

std::size_t GateOutcome::retained_count() const {
    std::size_t n = 0;
    for (const auto& d : doc_decisions) n += d.retained ? 1 : 0;
    return n;
}

ScoreRecord compute_reference_scores(const LabeledExample& example, const Backbone& backbone,
                                     std::span<const RetrievalHit> hits, const CorpusStore& docs) {
    try {
        const auto nr = backbone.without_retrieval(example);
        const auto context = resolve_hits(hits, docs);
        std::vector<double> scores;
        scores.reserve(hits.size());
        for (const auto& h : hits) scores.push_back(h.score);
        const auto rag = backbone.with_documents(example, context, scores);
        return ScoreRecord::from(nr.score, rag.score);
    } catch (const std::exception& e) {
        throw BackendError(fmt::format("example '{}': {}", example.id, e.what()));
    }
}

bool utility_gate(const ScoreRecord& scores, const GateThresholds& t) noexcept {
    return scores.delta > t.tau_delta && scores.s_rag > t.tau_s;
}

std::vector<double> document_scores(const LabeledExample& example, std::span<const RetrievalHit> hits,
                                    const Backbone& backbone, const CorpusStore& docs) {
    std::vector<double> out;
    out.reserve(hits.size());
    for (const auto& h : hits) {
        try {
            out.push_back(backbone.with_document(example, docs.get(h.doc_id)).score);
        } catch (const std::exception& e) {
            throw BackendError(
                fmt::format("example '{}', document '{}': {}", example.id, h.doc_id, e.what()));
        }
    }
    return out;
}

DocumentGateResult decide_documents(std::span<const RetrievalHit> hits,
                                    std::span<const double> doc_scores, double s_nr,
                                    const GateThresholds& t) {
    if (hits.size() != doc_scores.size()) {
        throw Error("document gate: one score per hit required");
    }
    DocumentGateResult result;
    result.decisions.reserve(hits.size());
    bool any = false;
    for (std::size_t i = 0; i < hits.size(); ++i) {
        const double margin = doc_scores[i] - s_nr;
        const bool keep = margin > t.tau_doc;
        any = any || keep;
        result.decisions.push_back({hits[i].doc_id, hits[i].rank, doc_scores[i], margin, keep});
    }
    if (!any && !hits.empty()) {
        result.fallback_used = true;
        for (auto& d : result.decisions) {
            d.retained = d.rank >= 1 && static_cast<std::size_t>(d.rank) <= t.n_min;
        }
    }
    return result;
}

DocumentGateResult document_gate(const LabeledExample& example, std::span<const RetrievalHit> hits,
                                 double s_nr, const Backbone& backbone, const CorpusStore& docs,
                                 const GateThresholds& t) {
    const auto scores = document_scores(example, hits, backbone, docs);
    return decide_documents(hits, scores, s_nr, t);
}

json outcome_to_json(const GateOutcome& o) {
    json docs = json::array();
    for (const auto& d : o.doc_decisions) {
        docs.push_back({{"doc_id", d.doc_id}, {"rank", d.rank}, {"s_doc", d.s_doc}, {"retained", d.retained}});
    }
    return {{"example_id", o.example_id},         {"s_nr", o.scores.s_nr},
            {"s_rag", o.scores.s_rag},            {"delta", o.scores.delta},
            {"utility_passed", o.utility_passed}, {"fallback_used", o.fallback_used},
            {"docs", docs}};
}

GateOutcome outcome_from_json(const json& j) {
    GateOutcome o;
    try {
        o.example_id = j.at("example_id").get<std::string>();
        o.scores.s_nr = j.at("s_nr").get<double>();
        o.scores.s_rag = j.at("s_rag").get<double>();
        o.scores.delta = j.at("delta").get<double>();
        o.utility_passed = j.at("utility_passed").get<bool>();
        o.fallback_used = j.at("fallback_used").get<bool>();
        for (const auto& d : j.at("docs")) {
            DocumentDecision dd;
            dd.doc_id = d.at("doc_id").get<std::string>();
            dd.rank = d.at("rank").get<int>();
            dd.s_doc = d.at("s_doc").get<double>();
            dd.margin = dd.s_doc - o.scores.s_nr;
            dd.retained = d.at("retained").get<bool>();
            o.doc_decisions.push_back(std::move(dd));
        }
    } catch (const json::exception& e) {
        throw Error(fmt::format("malformed gate outcome: {}", e.what()));
    }
    return o;
}

void save_outcomes(const std::filesystem::path& path, std::span<const GateOutcome> outcomes) {
    std::vector<json> records;
    records.reserve(outcomes.size());
    for (const auto& o : outcomes) records.push_back(outcome_to_json(o));
    write_records(path, records);
}

std::vector<GateOutcome> load_outcomes(const std::filesystem::path& path) {
    std::vector<GateOutcome> out;
    for_each_record(path, [&](std::size_t line, const json& r) {
        try {
            out.push_back(outcome_from_json(r));
        } catch (const Error& e) {
            throw LoadError(fmt::format("{}:{}: {}", path.string(), line, e.what()), line);
        }
    });
    return out;
}

}  // namespace wbrag
