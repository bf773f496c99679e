#include "wbrag/corpus.hpp"

#include <unordered_set>

#include <fmt/format.h>

#include "wbrag/error.hpp"
#include "wbrag/metrics.hpp"

namespace wbrag {

namespace {

bool is_space(char ch) {
    return ch == ' ' || ch == '\t' || ch == '\n' || ch == '\r' || ch == '\f' || ch == '\v';
}

bool is_terminator(char ch) { return ch == '.' || ch == '?' || ch == '!'; }

std::string require_string(const json& record, const char* key, const std::filesystem::path& path,
                           std::size_t line) {
    auto it = record.find(key);
    if (it == record.end() || !it->is_string()) {
        throw LoadError(fmt::format("{}:{}: malformed record: missing string field \"{}\"",
                                    path.string(), line, key),
                        line);
    }
    return it->get<std::string>();
}

std::string optional_string(const json& record, const char* key, const std::filesystem::path& path,
                            std::size_t line) {
    auto it = record.find(key);
    if (it == record.end() || it->is_null()) return {};
    if (!it->is_string()) {
        throw LoadError(fmt::format("{}:{}: malformed record: field \"{}\" must be a string",
                                    path.string(), line, key),
                        line);
    }
    return it->get<std::string>();
}

}  // namespace

std::string_view to_string(Source source) {
    return source == Source::writeback ? "writeback" : "original";
}

Source source_from_string(std::string_view name) {
    if (name == "original") return Source::original;
    if (name == "writeback") return Source::writeback;
    throw Error(fmt::format("unknown source '{}' (expected original or writeback)", name));
}

std::string trim(std::string_view text) {
    std::size_t b = 0;
    std::size_t e = text.size();
    while (b < e && is_space(text[b])) ++b;
    while (e > b && is_space(text[e - 1])) --e;
    return std::string(text.substr(b, e - b));
}

CorpusStore::CorpusStore(std::vector<Document> docs) {
    docs_.reserve(docs.size());
    for (auto& d : docs) add(std::move(d));
}

void CorpusStore::add(Document doc) {
    if (doc.id.empty()) throw Error("document id must be non-empty");
    if (trim(doc.text).empty()) throw Error(fmt::format("document '{}' has empty text", doc.id));
    if (lookup_.contains(doc.id)) throw Error(fmt::format("duplicate document id '{}'", doc.id));
    lookup_.emplace(doc.id, docs_.size());
    docs_.push_back(std::move(doc));
}

const Document* CorpusStore::find(std::string_view id) const {
    auto it = lookup_.find(std::string(id));
    return it == lookup_.end() ? nullptr : &docs_[it->second];
}

const Document& CorpusStore::get(std::string_view id) const {
    if (const auto* doc = find(id)) return *doc;
    throw Error(fmt::format("unknown document id '{}'", id));
}

json document_to_json(const Document& doc) {
    json j = {{"id", doc.id}, {"title", doc.title}, {"text", doc.text}};
    if (doc.source == Source::writeback) j["source"] = "writeback";
    if (!doc.meta.empty()) j["meta"] = doc.meta;
    return j;
}

CorpusStore load_corpus(const std::filesystem::path& path) {
    CorpusStore store;
    for_each_record(path, [&](std::size_t line, const json& r) {
        Document doc;
        doc.id = require_string(r, "id", path, line);
        doc.text = require_string(r, "text", path, line);
        doc.title = optional_string(r, "title", path, line);
        const auto source = optional_string(r, "source", path, line);
        doc.source = source == "writeback" ? Source::writeback : Source::original;
        if (auto it = r.find("meta"); it != r.end() && !it->is_null()) {
            if (!it->is_object()) {
                throw LoadError(fmt::format("{}:{}: malformed record: \"meta\" must be an object",
                                            path.string(), line),
                                line);
            }
            for (const auto& [k, v] : it->items()) {
                doc.meta[k] = v.is_string() ? v.get<std::string>() : v.dump();
            }
        }
        if (doc.id.empty()) {
            throw LoadError(fmt::format("{}:{}: document id must be non-empty", path.string(), line),
                            line);
        }
        if (store.find(doc.id) != nullptr) {
            throw LoadError(
                fmt::format("{}:{}: duplicate document id '{}'", path.string(), line, doc.id), line);
        }
        if (trim(doc.text).empty()) {
            throw LoadError(
                fmt::format("{}:{}: document '{}' has empty text", path.string(), line, doc.id),
                line);
        }
        store.add(std::move(doc));
    });
    return store;
}

void save_corpus(const std::filesystem::path& path, const CorpusStore& corpus) {
    std::vector<json> records;
    records.reserve(corpus.size());
    for (const auto& d : corpus) records.push_back(document_to_json(d));
    write_records(path, records);
}

json example_to_json(const LabeledExample& ex) {
    return {{"id", ex.id}, {"question", ex.question}, {"gold_answers", ex.gold_answers}};
}

std::vector<LabeledExample> load_examples(const std::filesystem::path& path) {
    std::vector<LabeledExample> out;
    std::unordered_set<std::string> seen;
    for_each_record(path, [&](std::size_t line, const json& r) {
        LabeledExample ex;
        ex.id = optional_string(r, "id", path, line);
        if (ex.id.empty()) ex.id = fmt::format("ex-{}", line);
        ex.question = require_string(r, "question", path, line);
        if (trim(ex.question).empty()) {
            throw LoadError(fmt::format("{}:{}: empty question: {}", path.string(), line, ex.id),
                            line);
        }
        auto golds = r.find("gold_answers");
        if (golds == r.end() || !golds->is_array()) {
            throw LoadError(fmt::format("{}:{}: malformed record: missing array field "
                                        "\"gold_answers\"",
                                        path.string(), line),
                            line);
        }
        if (golds->empty()) {
            throw LoadError(fmt::format("empty gold answers: {}", ex.id), line);
        }
        for (const auto& g : *golds) {
            if (!g.is_string() || normalize_answer(g.get<std::string>()).empty()) {
                throw LoadError(fmt::format("empty gold answers: {}", ex.id), line);
            }
            ex.gold_answers.push_back(g.get<std::string>());
        }
        if (!seen.insert(ex.id).second) {
            throw LoadError(
                fmt::format("{}:{}: duplicate example id '{}'", path.string(), line, ex.id), line);
        }
        out.push_back(std::move(ex));
    });
    return out;
}

void save_examples(const std::filesystem::path& path, std::span<const LabeledExample> examples) {
    std::vector<json> records;
    records.reserve(examples.size());
    for (const auto& ex : examples) records.push_back(example_to_json(ex));
    write_records(path, records);
}

std::size_t count_tokens(std::string_view text) {
    std::size_t count = 0;
    bool in_token = false;
    for (char ch : text) {
        const bool space = is_space(ch);
        if (!space && !in_token) ++count;
        in_token = !space;
    }
    return count;
}

std::vector<std::string> split_sentences(std::string_view text) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (!is_terminator(text[i])) continue;
        const bool boundary = i + 1 == text.size() || is_space(text[i + 1]);
        if (!boundary) continue;
        auto piece = trim(text.substr(start, i + 1 - start));
        if (!piece.empty()) out.push_back(std::move(piece));
        start = i + 1;
    }
    auto tail = trim(text.substr(std::min(start, text.size())));
    if (!tail.empty()) out.push_back(std::move(tail));
    return out;
}

}  // namespace wbrag
