#include "wbrag/metrics.hpp"

#include <algorithm>
#include <map>

#include <fmt/format.h>

#include "wbrag/error.hpp"

namespace wbrag {

namespace {

bool is_ascii_punct(unsigned char c) {
    return (c >= 33 && c <= 47) || (c >= 58 && c <= 64) || (c >= 91 && c <= 96) ||
           (c >= 123 && c <= 126);
}

bool is_space(unsigned char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

std::vector<std::string> split_ws(std::string_view text) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && is_space(static_cast<unsigned char>(text[i]))) ++i;
        std::size_t j = i;
        while (j < text.size() && !is_space(static_cast<unsigned char>(text[j]))) ++j;
        if (j > i) out.emplace_back(text.substr(i, j - i));
        i = j;
    }
    return out;
}

bool contains_run(const std::vector<std::string>& hay, const std::vector<std::string>& needle) {
    if (needle.empty()) return hay.empty();
    if (needle.size() > hay.size()) return false;
    return std::search(hay.begin(), hay.end(), needle.begin(), needle.end()) != hay.end();
}

double f1_single(const std::vector<std::string>& pred, const std::vector<std::string>& gold) {
    if (pred.empty() || gold.empty()) return 0.0;
    std::map<std::string_view, long> counts;
    for (const auto& t : gold) ++counts[t];
    long overlap = 0;
    for (const auto& t : pred) {
        auto it = counts.find(t);
        if (it != counts.end() && it->second > 0) {
            --it->second;
            ++overlap;
        }
    }
    if (overlap == 0) return 0.0;
    const double precision = static_cast<double>(overlap) / static_cast<double>(pred.size());
    const double recall = static_cast<double>(overlap) / static_cast<double>(gold.size());
    return 2.0 * precision * recall / (precision + recall);
}

}  // namespace

std::string_view to_string(MetricKind kind) {
    switch (kind) {
        case MetricKind::accuracy: return "accuracy";
        case MetricKind::exact_match: return "exact_match";
        case MetricKind::token_f1: return "token_f1";
    }
    return "unknown";
}

std::string normalize_answer(std::string_view text) {
    std::string lowered;
    lowered.reserve(text.size());
    for (char ch : text) {
        auto c = static_cast<unsigned char>(ch);
        if (is_ascii_punct(c)) continue;
        if (c >= 'A' && c <= 'Z') c = static_cast<unsigned char>(c - 'A' + 'a');
        lowered.push_back(static_cast<char>(c));
    }
    std::string out;
    for (const auto& tok : split_ws(lowered)) {
        if (tok == "a" || tok == "an" || tok == "the") continue;
        if (!out.empty()) out.push_back(' ');
        out += tok;
    }
    return out;
}

std::vector<std::string> normalized_tokens(std::string_view text) {
    return split_ws(normalize_answer(text));
}

double exact_match(std::string_view prediction, std::span<const std::string> golds) {
    const auto pred = normalize_answer(prediction);
    for (const auto& g : golds) {
        if (normalize_answer(g) == pred) return 1.0;
    }
    return 0.0;
}

double accuracy_contains(std::string_view prediction, std::span<const std::string> golds) {
    const auto pred = normalized_tokens(prediction);
    for (const auto& g : golds) {
        if (contains_run(pred, normalized_tokens(g))) return 1.0;
    }
    return 0.0;
}

double token_f1(std::string_view prediction, std::span<const std::string> golds) {
    const auto pred = normalized_tokens(prediction);
    double best = 0.0;
    for (const auto& g : golds) {
        best = std::max(best, f1_single(pred, normalized_tokens(g)));
    }
    return best;
}

double score(MetricKind kind, std::string_view prediction, std::span<const std::string> golds) {
    switch (kind) {
        case MetricKind::accuracy: return accuracy_contains(prediction, golds);
        case MetricKind::exact_match: return exact_match(prediction, golds);
        case MetricKind::token_f1: return token_f1(prediction, golds);
    }
    return 0.0;
}

MetricKind metric_for_dataset(std::string_view name) {
    if (name == "nq" || name == "boolq" || name == "zsre" || name == "hotpotqa") {
        return MetricKind::accuracy;
    }
    if (name == "fever") return MetricKind::token_f1;
    if (name == "squad") return MetricKind::exact_match;
    constexpr std::string_view custom = "custom:";
    if (name.starts_with(custom)) {
        const auto kind = name.substr(custom.size());
        if (kind == "accuracy") return MetricKind::accuracy;
        if (kind == "exact_match") return MetricKind::exact_match;
        if (kind == "token_f1") return MetricKind::token_f1;
    }
    throw Error(fmt::format(
        "unknown dataset '{}'; valid names: nq, boolq, fever, zsre, hotpotqa, squad, "
        "custom:accuracy, custom:exact_match, custom:token_f1",
        name));
}

}  // namespace wbrag
