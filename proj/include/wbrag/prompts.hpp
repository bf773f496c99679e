#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>

#include "wbrag/corpus.hpp"

namespace wbrag {

/// One chat exchange: a system message and a user message.
struct Prompt {
    std::string system;
    std::string user;

    friend bool operator==(const Prompt&, const Prompt&) = default;
};

namespace prompt_text {

inline constexpr std::string_view kDocumentsMarker = "The following are given documents.\n\n";
inline constexpr std::string_view kQuestionPrefix = "Question: ";

inline constexpr std::string_view kExtractiveSystem =
    "Extract only answer-relevant evidence sentences from retrieved passages.\n"
    "Do not paraphrase. Keep exact sentence text.";

inline constexpr std::string_view kRewriteSystem =
    "You are writing a high-utility retrieval document for future QA. "
    "Use only facts supported by the provided knowledge.";

inline constexpr std::string_view kRetrievedPassagesHeader = "Retrieved passages:\n";
inline constexpr std::string_view kSupportingKnowledgeHeader = "Supporting knowledge:\n";

inline constexpr std::string_view kRewriteInstructions =
    "Write one merged document in the same style as the original evidence corpus.\n"
    "Quality requirements:\n"
    "1) Add concise supporting facts that improve retrieval recall: key entities, aliases, "
    "dates, numbers, and locations when supported.\n"
    "2) Reuse important terms from the question and evidence; include alternative names only "
    "if supported.\n"
    "3) Keep it factual and compact; do not add unsupported claims.\n"
    "Output format (exactly two parts, no labels):\n"
    "<title line>\n"
    "<knowledge paragraph(s)>\n"
    "Do not output prefixes like `Title:` or `Knowledge:`.";

}  // namespace prompt_text

/// "Doc <i>(Title: <title>) <text>" blocks, numbered from 1, separated by a
/// blank line. Used inside task prompts.
std::string format_task_reference(std::span<const Document> docs);

/// Task prompt for `dataset`. With retrieval the system message ends with the
/// document block; without it the evidence wording is dropped.
Prompt build_task_prompt(std::string_view dataset, std::string_view question,
                         std::span<const Document> docs, bool with_retrieval);

/// Document block of a retrieval task prompt; empty when there is none.
std::string_view task_reference_block(std::string_view system);

/// Text after "Question: " on the first line that starts with it.
std::string_view question_from_user(std::string_view user);

}  // namespace wbrag
