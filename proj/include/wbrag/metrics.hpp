#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace wbrag {

enum class MetricKind { accuracy, exact_match, token_f1 };

std::string_view to_string(MetricKind kind);

/// Lowercase, strip ASCII punctuation, drop the articles "a", "an", "the",
/// collapse whitespace runs and trim.
std::string normalize_answer(std::string_view text);

/// Whitespace tokens of normalize_answer(text).
std::vector<std::string> normalized_tokens(std::string_view text);

double exact_match(std::string_view prediction, std::span<const std::string> golds);

/// 1 when some normalized gold is a contiguous token run of the normalized
/// prediction. Token-level, so "even" does not match inside "seventy".
double accuracy_contains(std::string_view prediction, std::span<const std::string> golds);

/// Bag-of-tokens F1 with multiplicity, maximised over golds.
double token_f1(std::string_view prediction, std::span<const std::string> golds);

double score(MetricKind kind, std::string_view prediction, std::span<const std::string> golds);

/// nq, boolq, zsre, hotpotqa -> accuracy; fever -> token_f1; squad -> exact_match;
/// "custom:<kind>" selects a kind directly. Unknown names raise Error.
MetricKind metric_for_dataset(std::string_view name);

}  // namespace wbrag
