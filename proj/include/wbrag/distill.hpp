#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "wbrag/backends.hpp"
#include "wbrag/corpus.hpp"
#include "wbrag/jsonl.hpp"
#include "wbrag/prompts.hpp"

namespace wbrag {

struct DistillConfig {
    std::size_t extractive_max_sentences = 8;
    std::size_t fallback_selected_sentences = 6;
    int max_new_tokens = 128;
    double temperature = 0.0;

    void validate() const;

    friend bool operator==(const DistillConfig&, const DistillConfig&) = default;
};

struct EvidenceLine {
    std::size_t doc_index = 0;  // 1-based position among the retained documents
    std::string sentence;

    friend bool operator==(const EvidenceLine&, const EvidenceLine&) = default;
};

struct EvidenceSelection {
    std::vector<EvidenceLine> lines;
    bool used_fallback = false;  // parse came back empty; round-robin sentences used
};

/// One distilled write-back document.
struct KnowledgeUnit {
    std::string id;
    std::string title;
    std::string body;
    std::string source_example_id;
    std::vector<std::string> retained_doc_ids;
    std::size_t source_tokens = 0;
    std::size_t distilled_tokens = 0;
    bool fallback_used = false;

    /// The document indexed for retrieval; source = writeback.
    [[nodiscard]] Document to_document() const;

    friend bool operator==(const KnowledgeUnit&, const KnowledgeUnit&) = default;
};

// Prompt builders take the question and documents only. No gold answer can
// reach the distiller through them.

/// Retained documents are listed as "Doc <i>: <title>\n<text>", numbered from 1.
Prompt build_extractive_prompt(std::string_view question, std::span<const Document> retained_docs,
                               const DistillConfig& cfg);

/// Keeps lines of the form "[Doc N] sentence" with 1 <= N <= num_docs, in
/// emission order, truncated to max_sentences. Anything else is dropped.
EvidenceSelection parse_extractive_output(std::string_view raw, std::size_t num_docs,
                                          std::size_t max_sentences);

/// Runs the extractive prompt. An empty parse falls back to the first
/// fallback_selected_sentences sentences taken round-robin across documents.
EvidenceSelection select_evidence(std::string_view question, std::span<const Document> retained_docs,
                                  Generator& generator, const DistillConfig& cfg);

/// Round-robin sentence pick used when extraction yields nothing.
EvidenceSelection round_robin_sentences(std::span<const Document> retained_docs, std::size_t count);

/// Evidence lines are rendered one per line with their "[Doc N]" tag.
Prompt build_rewrite_prompt(std::string_view question, const EvidenceSelection& evidence);

struct RewriteOutput {
    std::string title;
    std::string body;

    friend bool operator==(const RewriteOutput&, const RewriteOutput&) = default;
};

/// First non-empty line is the title, the rest the body. Stray "Title:" /
/// "Knowledge:" prefixes are removed. A single line becomes the body.
RewriteOutput parse_rewrite_output(std::string_view raw);

/// Extract, rewrite, parse. The unit id is "wb-" + example_id.
KnowledgeUnit distill(std::string_view question, std::string_view example_id,
                      std::span<const Document> retained_docs, Generator& generator,
                      const DistillConfig& cfg);

json unit_to_json(const KnowledgeUnit& unit);
KnowledgeUnit unit_from_json(const json& j);
void save_units(const std::filesystem::path& path, std::span<const KnowledgeUnit> units);
void append_units(const std::filesystem::path& path, std::span<const KnowledgeUnit> units);
std::vector<KnowledgeUnit> load_units(const std::filesystem::path& path);

}  // namespace wbrag
