#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace wbrag {

struct KeyValue {
    std::string key;
    std::string value;
    std::size_t line = 0;
};

/// Flat "key = value" text. Blank lines and lines starting with '#' are
/// skipped; keys and values are trimmed. A line without '=' raises LoadError.
std::vector<KeyValue> parse_key_values(std::string_view text, std::string_view origin);
std::vector<KeyValue> load_key_values(const std::filesystem::path& path);

double parse_double(std::string_view text, std::string_view what);
std::size_t parse_size(std::string_view text, std::string_view what);
long long parse_int(std::string_view text, std::string_view what);
bool parse_bool(std::string_view text, std::string_view what);

/// Comma-separated values, each trimmed. Empty items are rejected.
std::vector<std::string> split_list(std::string_view text);

}  // namespace wbrag
