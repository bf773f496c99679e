#include "wbrag/prompts.hpp"

#include <fmt/format.h>

namespace wbrag {

namespace {

struct TaskInstructions {
    std::string_view with_retrieval;
    std::string_view without_retrieval;
};

TaskInstructions instructions_for(std::string_view dataset) {
    if (dataset == "boolq") {
        return {"Decide whether the answer to the question is true or false using the provided "
                "evidence. Output exactly one word: True or False. Do not output yes or no, "
                "labels, or any explanation.",
                "Decide whether the answer to the question is true or false from your own "
                "knowledge. Output exactly one word: True or False. Do not output yes or no, "
                "labels, or any explanation."};
    }
    if (dataset == "hotpotqa") {
        return {"Answer the multi-hop question using the provided evidence. Output only the final "
                "answer. If the question is yes or no, output exactly yes or no in lowercase. "
                "Otherwise output only the shortest answer phrase.",
                "Answer the multi-hop question from your own knowledge. Output only the final "
                "answer. If the question is yes or no, output exactly yes or no in lowercase. "
                "Otherwise output only the shortest answer phrase."};
    }
    if (dataset == "fever") {
        return {"Verify the claim using the provided evidence. Output exactly one label: SUPPORTS "
                "or REFUTES. Do not output any explanation.",
                "Verify the claim from your own knowledge. Output exactly one label: SUPPORTS or "
                "REFUTES. Do not output any explanation."};
    }
    return {"Answer the factoid question using the provided evidence. Output only the short final "
            "answer phrase or entity name. Do not output a sentence or explanation.",
            "Answer the factoid question from your own knowledge. Output only the short final "
            "answer phrase or entity name. Do not output a sentence or explanation."};
}

}  // namespace

std::string format_task_reference(std::span<const Document> docs) {
    std::string out;
    for (std::size_t i = 0; i < docs.size(); ++i) {
        if (i > 0) out += "\n\n";
        out += fmt::format("Doc {}(Title: {}) {}", i + 1, docs[i].title, docs[i].text);
    }
    return out;
}

Prompt build_task_prompt(std::string_view dataset, std::string_view question,
                         std::span<const Document> docs, bool with_retrieval) {
    const auto text = instructions_for(dataset);
    Prompt p;
    if (with_retrieval) {
        p.system = fmt::format("{}\n{}{}", text.with_retrieval, prompt_text::kDocumentsMarker,
                               format_task_reference(docs));
    } else {
        p.system = std::string(text.without_retrieval);
    }
    p.user = fmt::format("{}{}", prompt_text::kQuestionPrefix, question);
    return p;
}

std::string_view task_reference_block(std::string_view system) {
    const auto pos = system.find(prompt_text::kDocumentsMarker);
    if (pos == std::string_view::npos) return {};
    return system.substr(pos + prompt_text::kDocumentsMarker.size());
}

std::string_view question_from_user(std::string_view user) {
    std::size_t pos = 0;
    while (pos <= user.size()) {
        auto eol = user.find('\n', pos);
        if (eol == std::string_view::npos) eol = user.size();
        auto line = user.substr(pos, eol - pos);
        if (line.starts_with(prompt_text::kQuestionPrefix)) {
            return line.substr(prompt_text::kQuestionPrefix.size());
        }
        pos = eol + 1;
    }
    return {};
}

}  // namespace wbrag
