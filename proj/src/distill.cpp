#include "wbrag/distill.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>

#include <fmt/format.h>

#include "wbrag/error.hpp"

namespace wbrag {

namespace {

std::vector<std::string_view> lines_of(std::string_view text) {
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto eol = text.find('\n', pos);
        if (eol == std::string_view::npos) eol = text.size();
        auto line = text.substr(pos, eol - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        out.push_back(line);
        pos = eol + 1;
    }
    return out;
}

bool istarts_with(std::string_view text, std::string_view prefix) {
    if (text.size() < prefix.size()) return false;
    for (std::size_t i = 0; i < prefix.size(); ++i) {
        char a = text[i];
        char b = prefix[i];
        if (a >= 'A' && a <= 'Z') a = static_cast<char>(a - 'A' + 'a');
        if (b >= 'A' && b <= 'Z') b = static_cast<char>(b - 'A' + 'a');
        if (a != b) return false;
    }
    return true;
}

std::string strip_label(std::string_view line) {
    auto t = trim(line);
    for (std::string_view label : {"title:", "knowledge:"}) {
        if (istarts_with(t, label)) return trim(std::string_view(t).substr(label.size()));
    }
    return t;
}

std::string format_extractive_reference(std::span<const Document> docs) {
    std::string out;
    for (std::size_t i = 0; i < docs.size(); ++i) {
        if (i > 0) out.push_back('\n');
        out += fmt::format("Doc {}: {}\n{}", i + 1, docs[i].title, docs[i].text);
    }
    return out;
}

}  // namespace

void DistillConfig::validate() const {
    if (extractive_max_sentences == 0) throw Error("extractive_max_sentences must be positive");
    if (fallback_selected_sentences == 0) throw Error("fallback_selected_sentences must be positive");
    if (fallback_selected_sentences > extractive_max_sentences) {
        throw Error("fallback_selected_sentences must not exceed extractive_max_sentences");
    }
    if (max_new_tokens <= 0) throw Error("max_new_tokens must be positive");
    if (temperature < 0.0) throw Error("temperature must be non-negative");
}

Document KnowledgeUnit::to_document() const {
    Document d;
    d.id = id;
    d.title = title;
    d.text = body;
    d.source = Source::writeback;
    return d;
}

Prompt build_extractive_prompt(std::string_view question, std::span<const Document> retained_docs,
                               const DistillConfig& cfg) {
    Prompt p;
    p.system = std::string(prompt_text::kExtractiveSystem);
    p.user = fmt::format(
        "{}{}\n{}{}\nSelect up to {} evidence sentences.\n"
        "Output one sentence per line using this format only:\n"
        "[Doc <index>] <sentence>\n"
        "where Doc index starts from 1.",
        prompt_text::kQuestionPrefix, question, prompt_text::kRetrievedPassagesHeader,
        format_extractive_reference(retained_docs), cfg.extractive_max_sentences);
    return p;
}

EvidenceSelection parse_extractive_output(std::string_view raw, std::size_t num_docs,
                                          std::size_t max_sentences) {
    EvidenceSelection sel;
    for (auto line : lines_of(raw)) {
        if (sel.lines.size() >= max_sentences) break;
        const auto t = trim(line);
        std::string_view v(t);
        if (!v.starts_with("[Doc ")) continue;
        const auto close = v.find(']');
        if (close == std::string_view::npos) continue;
        const auto digits = v.substr(5, close - 5);
        std::size_t idx = 0;
        auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), idx);
        if (ec != std::errc() || ptr != digits.data() + digits.size() || digits.empty()) continue;
        if (idx < 1 || idx > num_docs) continue;
        auto rest = v.substr(close + 1);
        if (rest.empty() || (rest.front() != ' ' && rest.front() != '\t')) continue;
        auto sentence = trim(rest);
        if (sentence.empty()) continue;
        sel.lines.push_back({idx, std::move(sentence)});
    }
    return sel;
}

EvidenceSelection round_robin_sentences(std::span<const Document> retained_docs, std::size_t count) {
    std::vector<std::vector<std::string>> per_doc;
    per_doc.reserve(retained_docs.size());
    for (const auto& d : retained_docs) per_doc.push_back(split_sentences(d.text));

    EvidenceSelection sel;
    sel.used_fallback = true;
    for (std::size_t round = 0; sel.lines.size() < count; ++round) {
        bool any = false;
        for (std::size_t i = 0; i < per_doc.size() && sel.lines.size() < count; ++i) {
            if (round < per_doc[i].size()) {
                sel.lines.push_back({i + 1, per_doc[i][round]});
                any = true;
            }
        }
        if (!any) break;
    }
    return sel;
}

EvidenceSelection select_evidence(std::string_view question, std::span<const Document> retained_docs,
                                  Generator& generator, const DistillConfig& cfg) {
    if (retained_docs.empty()) throw Error("select_evidence: no retained documents");
    const auto prompt = build_extractive_prompt(question, retained_docs, cfg);
    const auto raw =
        generator.generate({prompt.system, prompt.user, cfg.max_new_tokens, cfg.temperature});
    auto sel = parse_extractive_output(raw, retained_docs.size(), cfg.extractive_max_sentences);
    if (!sel.lines.empty()) return sel;
    return round_robin_sentences(retained_docs, cfg.fallback_selected_sentences);
}

Prompt build_rewrite_prompt(std::string_view question, const EvidenceSelection& evidence) {
    if (evidence.lines.empty()) throw Error("build_rewrite_prompt: empty evidence");
    std::string evidence_text;
    for (const auto& l : evidence.lines) {
        if (!evidence_text.empty()) evidence_text.push_back('\n');
        evidence_text += fmt::format("[Doc {}] {}", l.doc_index, l.sentence);
    }
    Prompt p;
    p.system = std::string(prompt_text::kRewriteSystem);
    p.user = fmt::format("{}{}\n{}{}\n{}", prompt_text::kQuestionPrefix, question,
                         prompt_text::kSupportingKnowledgeHeader, evidence_text,
                         prompt_text::kRewriteInstructions);
    return p;
}

RewriteOutput parse_rewrite_output(std::string_view raw) {
    const auto lines = lines_of(raw);
    std::size_t first = 0;
    while (first < lines.size() && trim(lines[first]).empty()) ++first;
    if (first == lines.size()) throw Error("empty distillation");

    std::vector<std::string> rest;
    for (std::size_t i = first + 1; i < lines.size(); ++i) rest.emplace_back(lines[i]);
    while (!rest.empty() && trim(rest.back()).empty()) rest.pop_back();
    while (!rest.empty() && trim(rest.front()).empty()) rest.erase(rest.begin());

    RewriteOutput out;
    if (rest.empty()) {
        out.body = strip_label(lines[first]);
    } else {
        out.title = strip_label(lines[first]);
        rest.front() = strip_label(rest.front());
        for (std::size_t i = 0; i < rest.size(); ++i) {
            if (i > 0) out.body.push_back('\n');
            out.body += rest[i];
        }
        out.body = trim(out.body);
    }
    if (out.body.empty()) {
        out.body = std::move(out.title);
        out.title.clear();
    }
    if (out.body.empty()) throw Error("empty distillation");
    return out;
}

KnowledgeUnit distill(std::string_view question, std::string_view example_id,
                      std::span<const Document> retained_docs, Generator& generator,
                      const DistillConfig& cfg) {
    try {
        const auto evidence = select_evidence(question, retained_docs, generator, cfg);
        const auto prompt = build_rewrite_prompt(question, evidence);
        const auto raw =
            generator.generate({prompt.system, prompt.user, cfg.max_new_tokens, cfg.temperature});
        auto parsed = parse_rewrite_output(raw);

        KnowledgeUnit unit;
        unit.id = fmt::format("wb-{}", example_id);
        unit.source_example_id = std::string(example_id);
        unit.title = std::move(parsed.title);
        unit.body = std::move(parsed.body);
        for (const auto& d : retained_docs) {
            unit.retained_doc_ids.push_back(d.id);
            unit.source_tokens += count_tokens(d.text);
        }
        unit.distilled_tokens = count_tokens(unit.title + " " + unit.body);
        return unit;
    } catch (const std::exception& e) {
        throw Error(fmt::format("distillation for example '{}' failed: {}", example_id, e.what()));
    }
}

json unit_to_json(const KnowledgeUnit& u) {
    return {{"id", u.id},
            {"title", u.title},
            {"text", u.body},
            {"source_example_id", u.source_example_id},
            {"retained_doc_ids", u.retained_doc_ids},
            {"source_tokens", u.source_tokens},
            {"distilled_tokens", u.distilled_tokens},
            {"fallback_used", u.fallback_used}};
}

KnowledgeUnit unit_from_json(const json& j) {
    KnowledgeUnit u;
    try {
        u.id = j.at("id").get<std::string>();
        u.title = j.value("title", std::string());
        u.body = j.at("text").get<std::string>();
        u.source_example_id = j.at("source_example_id").get<std::string>();
        u.retained_doc_ids = j.at("retained_doc_ids").get<std::vector<std::string>>();
        u.source_tokens = j.at("source_tokens").get<std::size_t>();
        u.distilled_tokens = j.at("distilled_tokens").get<std::size_t>();
        u.fallback_used = j.at("fallback_used").get<bool>();
    } catch (const json::exception& e) {
        throw Error(fmt::format("malformed knowledge unit: {}", e.what()));
    }
    if (trim(u.body).empty()) throw Error(fmt::format("knowledge unit '{}' has empty text", u.id));
    return u;
}

void save_units(const std::filesystem::path& path, std::span<const KnowledgeUnit> units) {
    std::vector<json> records;
    records.reserve(units.size());
    for (const auto& u : units) records.push_back(unit_to_json(u));
    write_records(path, records);
}

void append_units(const std::filesystem::path& path, std::span<const KnowledgeUnit> units) {
    std::ofstream out(path, std::ios::binary | std::ios::app);
    if (!out) throw Error(fmt::format("cannot append to {}", path.string()));
    for (const auto& u : units) out << unit_to_json(u).dump() << '\n';
    if (!out) throw Error(fmt::format("write failed on {}", path.string()));
}

std::vector<KnowledgeUnit> load_units(const std::filesystem::path& path) {
    std::vector<KnowledgeUnit> out;
    for_each_record(path, [&](std::size_t line, const json& r) {
        try {
            out.push_back(unit_from_json(r));
        } catch (const Error& e) {
            throw LoadError(fmt::format("{}:{}: {}", path.string(), line, e.what()), line);
        }
    });
    return out;
}

}  // namespace wbrag
