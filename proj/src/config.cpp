#include "wbrag/config.hpp"

#include <charconv>
#include <cmath>

#include <fmt/format.h>

#include "wbrag/corpus.hpp"
#include "wbrag/error.hpp"
#include "wbrag/jsonl.hpp"

namespace wbrag {

std::vector<KeyValue> parse_key_values(std::string_view text, std::string_view origin) {
    std::vector<KeyValue> out;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        const auto line = trim(text.substr(pos, end - pos));
        ++line_no;
        pos = end + 1;
        if (line.empty() || line.front() == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw LoadError(fmt::format("{}:{}: expected 'key = value'", origin, line_no), line_no);
        }
        auto key = trim(std::string_view(line).substr(0, eq));
        if (key.empty()) {
            throw LoadError(fmt::format("{}:{}: empty key", origin, line_no), line_no);
        }
        out.push_back({std::move(key), trim(std::string_view(line).substr(eq + 1)), line_no});
    }
    return out;
}

std::vector<KeyValue> load_key_values(const std::filesystem::path& path) {
    return parse_key_values(read_text_file(path), path.string());
}

double parse_double(std::string_view text, std::string_view what) {
    const auto s = trim(text);
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(value)) {
        throw Error(fmt::format("{}: expected a number, got '{}'", what, text));
    }
    return value;
}

long long parse_int(std::string_view text, std::string_view what) {
    const auto s = trim(text);
    long long value = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
        throw Error(fmt::format("{}: expected an integer, got '{}'", what, text));
    }
    return value;
}

std::size_t parse_size(std::string_view text, std::string_view what) {
    const auto value = parse_int(text, what);
    if (value < 0) throw Error(fmt::format("{}: must be non-negative, got {}", what, value));
    return static_cast<std::size_t>(value);
}

bool parse_bool(std::string_view text, std::string_view what) {
    const auto s = trim(text);
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw Error(fmt::format("{}: expected true or false, got '{}'", what, text));
}

std::vector<std::string> split_list(std::string_view text) {
    std::vector<std::string> out;
    if (trim(text).empty()) return out;
    std::size_t pos = 0;
    while (true) {
        const auto comma = text.find(',', pos);
        auto item = trim(text.substr(pos, comma == std::string_view::npos ? text.npos : comma - pos));
        if (item.empty()) throw Error(fmt::format("empty item in list '{}'", text));
        out.push_back(std::move(item));
        if (comma == std::string_view::npos) break;
        pos = comma + 1;
    }
    return out;
}

}  // namespace wbrag
