#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "wbrag/jsonl.hpp"

namespace wbrag {

enum class Source { original, writeback };

std::string_view to_string(Source source);
Source source_from_string(std::string_view name);

struct Document {
    std::string id;
    std::string title;
    std::string text;
    Source source = Source::original;
    std::map<std::string, std::string> meta;

    friend bool operator==(const Document&, const Document&) = default;
};

struct LabeledExample {
    std::string id;
    std::string question;
    std::vector<std::string> gold_answers;

    friend bool operator==(const LabeledExample&, const LabeledExample&) = default;
};

/// Ordered document collection with id lookup. Iteration follows insertion
/// order. Ids are unique and texts non-blank; add() enforces both.
class CorpusStore {
public:
    CorpusStore() = default;
    explicit CorpusStore(std::vector<Document> docs);

    void add(Document doc);

    [[nodiscard]] std::size_t size() const noexcept { return docs_.size(); }
    [[nodiscard]] bool empty() const noexcept { return docs_.empty(); }
    [[nodiscard]] const Document& at(std::size_t pos) const { return docs_.at(pos); }
    [[nodiscard]] const Document* find(std::string_view id) const;
    [[nodiscard]] const Document& get(std::string_view id) const;
    [[nodiscard]] std::span<const Document> documents() const noexcept { return docs_; }

    [[nodiscard]] auto begin() const noexcept { return docs_.begin(); }
    [[nodiscard]] auto end() const noexcept { return docs_.end(); }

private:
    std::vector<Document> docs_;
    std::unordered_map<std::string, std::size_t> lookup_;
};

CorpusStore load_corpus(const std::filesystem::path& path);
void save_corpus(const std::filesystem::path& path, const CorpusStore& corpus);
json document_to_json(const Document& doc);

/// Examples without an "id" get "ex-<line number>".
std::vector<LabeledExample> load_examples(const std::filesystem::path& path);
void save_examples(const std::filesystem::path& path, std::span<const LabeledExample> examples);
json example_to_json(const LabeledExample& ex);

/// Number of maximal non-whitespace runs.
std::size_t count_tokens(std::string_view text);

/// Splits after '.', '?' or '!' when followed by whitespace or end of text.
/// Abbreviations such as "Dr." are split too.
std::vector<std::string> split_sentences(std::string_view text);

std::string trim(std::string_view text);

}  // namespace wbrag
