#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <span>
#include <string>

#include <nlohmann/json.hpp>

namespace wbrag {

using json = nlohmann::json;

/// Calls `fn(line_number, record)` for every non-blank line of `path`.
/// Malformed JSON raises LoadError with the offending line number.
void for_each_record(const std::filesystem::path& path,
                     const std::function<void(std::size_t, const json&)>& fn);

/// Writes one compact record per line, '\n' terminated. Parent directories are
/// created on demand.
void write_records(const std::filesystem::path& path, std::span<const json> records);

/// Whole-file helpers; failures raise Error naming the path.
std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& content);

}  // namespace wbrag
