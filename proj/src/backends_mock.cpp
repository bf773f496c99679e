#include <algorithm>
#include <array>
#include <charconv>
#include <optional>
#include <unordered_set>

#include <fmt/format.h>

#include "wbrag/backends.hpp"
#include "wbrag/corpus.hpp"
#include "wbrag/error.hpp"
#include "wbrag/metrics.hpp"
#include "wbrag/prompts.hpp"

namespace wbrag {

namespace {

constexpr std::array kStopwords = {
    "a",     "about", "after", "all",   "also",  "an",    "and",   "any",   "are",  "as",
    "at",    "be",    "been",  "by",    "can",   "did",   "do",    "does",  "for",  "from",
    "had",   "has",   "have",  "he",    "her",   "his",   "how",   "i",     "if",   "in",
    "into",  "is",    "it",    "its",   "many",  "more",  "much",  "not",   "of",   "on",
    "or",    "she",   "so",    "some",  "than",  "that",  "the",   "their", "them", "then",
    "there", "these", "they",  "this",  "those", "to",    "was",   "were",  "what", "when",
    "where", "which", "while", "who",   "whom",  "whose", "why",   "will",  "with", "would",
    "you",   "your"};

std::vector<std::string_view> split_lines(std::string_view text) {
    std::vector<std::string_view> lines;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto eol = text.find('\n', pos);
        if (eol == std::string_view::npos) eol = text.size();
        lines.push_back(text.substr(pos, eol - pos));
        pos = eol + 1;
    }
    return lines;
}

std::optional<std::size_t> parse_index(std::string_view digits) {
    std::size_t value = 0;
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), value);
    if (ec != std::errc() || ptr != digits.data() + digits.size()) return std::nullopt;
    return value;
}

struct ParsedDoc {
    std::size_t index = 0;
    std::string text;
};

// "Doc <i>: <title>" header lines followed by text lines. A header only counts
// when <i> continues the numbering, so document text cannot fake one.
std::vector<ParsedDoc> parse_formatted_reference(std::string_view block) {
    std::vector<ParsedDoc> docs;
    for (auto line : split_lines(block)) {
        if (line.starts_with("Doc ")) {
            auto colon = line.find(':');
            if (colon != std::string_view::npos) {
                auto idx = parse_index(line.substr(4, colon - 4));
                if (idx && *idx == docs.size() + 1) {
                    docs.push_back({*idx, {}});
                    continue;
                }
            }
        }
        if (docs.empty()) continue;
        auto& text = docs.back().text;
        if (!text.empty()) text.push_back('\n');
        text.append(line);
    }
    return docs;
}

std::string extractive_response(const GenerationRequest& request) {
    const std::string_view user = request.user;
    const auto question = question_from_user(user);
    const auto start = user.find(prompt_text::kRetrievedPassagesHeader);
    const auto tail = user.rfind("\nSelect up to ");
    if (start == std::string_view::npos || tail == std::string_view::npos || tail < start) {
        throw BackendError("mock distiller: malformed extractive prompt");
    }
    const auto block_begin = start + prompt_text::kRetrievedPassagesHeader.size();
    const auto block = user.substr(block_begin, tail - block_begin);
    const auto rest = user.substr(tail + std::string_view("\nSelect up to ").size());
    const auto space = rest.find(' ');
    const auto limit = parse_index(rest.substr(0, space));
    if (!limit) throw BackendError("mock distiller: cannot read sentence limit");

    const auto terms = question_terms(question);
    const std::unordered_set<std::string> term_set(terms.begin(), terms.end());

    std::string out;
    std::size_t emitted = 0;
    for (const auto& doc : parse_formatted_reference(block)) {
        for (const auto& sentence : split_sentences(doc.text)) {
            if (emitted >= *limit) return out;
            const auto toks = normalized_tokens(sentence);
            const bool hit = std::any_of(toks.begin(), toks.end(),
                                         [&](const std::string& t) { return term_set.contains(t); });
            if (!hit) continue;
            if (!out.empty()) out.push_back('\n');
            out += fmt::format("[Doc {}] {}", doc.index, sentence);
            ++emitted;
        }
    }
    return out;
}

std::string rewrite_response(const GenerationRequest& request) {
    const std::string_view user = request.user;
    const auto question = question_from_user(user);
    const auto start = user.find(prompt_text::kSupportingKnowledgeHeader);
    const auto tail = user.rfind("\nWrite one merged document");
    if (start == std::string_view::npos || tail == std::string_view::npos || tail < start) {
        throw BackendError("mock distiller: malformed rewrite prompt");
    }
    const auto block_begin = start + prompt_text::kSupportingKnowledgeHeader.size();
    const auto block = user.substr(block_begin, tail - block_begin);

    std::string body;
    for (auto line : split_lines(block)) {
        if (line.starts_with("[Doc ")) {
            auto close = line.find("] ");
            if (close != std::string_view::npos) line = line.substr(close + 2);
        }
        auto sentence = trim(line);
        if (sentence.empty()) continue;
        if (!body.empty()) body.push_back(' ');
        body += sentence;
    }
    std::string title = "Fused:";
    for (const auto& t : question_terms(question)) {
        title.push_back(' ');
        title += t;
    }
    return title + "\n" + body;
}

}  // namespace

std::uint64_t stable_hash(std::string_view text) noexcept {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

EmbeddingVector mock_embed(std::string_view text, std::size_t dim) {
    if (dim < 8) throw Error(fmt::format("mock embedder requires dim >= 8, got {}", dim));
    std::vector<float> v(dim, 0.0f);
    for (const auto& tok : normalized_tokens(text)) {
        const auto h = stable_hash(tok);
        const auto coord = static_cast<std::size_t>(h % dim);
        v[coord] += (h >> 63) != 0U ? -1.0f : 1.0f;
    }
    return EmbeddingVector::normalized(std::move(v));
}

MockEmbedder::MockEmbedder(std::size_t dim) : dim_(dim) {
    if (dim < 8) throw Error(fmt::format("mock embedder requires dim >= 8, got {}", dim));
}

std::vector<EmbeddingVector> MockEmbedder::embed(std::span<const std::string> texts) {
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(mock_embed(t, dim_));
    return out;
}

void OracleWorld::validate() const {
    for (const auto& [question, entry] : answer_map) {
        if (entry.required_facts.empty()) {
            throw Error(fmt::format("oracle world: question '{}' has no required facts", question));
        }
    }
}

json world_to_json(const OracleWorld& world) {
    json questions = json::array();
    for (const auto& [q, e] : world.answer_map) {
        questions.push_back({{"question", q}, {"required_facts", e.required_facts}, {"answer", e.answer}});
    }
    return {{"parametric_facts", world.parametric_facts}, {"questions", questions}};
}

OracleWorld world_from_json(const json& j) {
    OracleWorld world;
    try {
        for (const auto& f : j.at("parametric_facts")) world.parametric_facts.insert(f.get<std::string>());
        for (const auto& q : j.at("questions")) {
            OracleWorld::Entry e;
            e.required_facts = q.at("required_facts").get<std::vector<std::string>>();
            e.answer = q.at("answer").get<std::string>();
            world.answer_map.emplace(q.at("question").get<std::string>(), std::move(e));
        }
    } catch (const json::exception& e) {
        throw Error(fmt::format("malformed oracle world: {}", e.what()));
    }
    world.validate();
    return world;
}

OracleWorld load_world(const std::filesystem::path& path) {
    try {
        return world_from_json(json::parse(read_text_file(path)));
    } catch (const json::parse_error& e) {
        throw Error(fmt::format("{}: malformed oracle world: {}", path.string(), e.what()));
    }
}

void save_world(const std::filesystem::path& path, const OracleWorld& world) {
    write_text_file(path, world_to_json(world).dump(1) + "\n");
}

std::string oracle_generate(const GenerationRequest& request, const OracleWorld& world) {
    const auto question = question_from_user(request.user);
    auto it = world.answer_map.find(std::string(question));
    if (it == world.answer_map.end()) {
        throw BackendError(fmt::format("oracle: question not in world: '{}'", question));
    }
    const auto block = task_reference_block(request.system);
    for (const auto& fact : it->second.required_facts) {
        if (world.parametric_facts.contains(fact)) continue;
        if (block.find(fact) != std::string_view::npos) continue;
        return std::string(kOracleUnknown);
    }
    return it->second.answer;
}

OracleGenerator::OracleGenerator(OracleWorld world) : world_(std::move(world)) { world_.validate(); }

std::string OracleGenerator::generate(const GenerationRequest& request) {
    return oracle_generate(request, world_);
}

bool is_stopword(std::string_view token) {
    return std::find(kStopwords.begin(), kStopwords.end(), token) != kStopwords.end();
}

std::vector<std::string> question_terms(std::string_view question) {
    std::vector<std::string> out;
    std::unordered_set<std::string> seen;
    for (auto& t : normalized_tokens(question)) {
        if (is_stopword(t) || seen.contains(t)) continue;
        seen.insert(t);
        out.push_back(std::move(t));
    }
    return out;
}

std::string mock_distill_generate(const GenerationRequest& request) {
    if (request.system == prompt_text::kExtractiveSystem) return extractive_response(request);
    if (request.system == prompt_text::kRewriteSystem) return rewrite_response(request);
    throw BackendError("mock distiller: unrecognized prompt template");
}

std::string RecordingGenerator::generate(const GenerationRequest& request) {
    {
        std::lock_guard lock(mu_);
        requests_.push_back(request);
    }
    return inner_.generate(request);
}

std::vector<GenerationRequest> RecordingGenerator::requests() const {
    std::lock_guard lock(mu_);
    return requests_;
}

}  // namespace wbrag
