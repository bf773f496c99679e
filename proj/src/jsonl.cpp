#include "wbrag/jsonl.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "wbrag/error.hpp"

namespace wbrag {

namespace {

bool is_blank(const std::string& line) {
    return line.find_first_not_of(" \t\r\n") == std::string::npos;
}

void ensure_parent(const std::filesystem::path& path) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
        if (ec) {
            throw Error(fmt::format("cannot create directory {}: {}", path.parent_path().string(),
                                    ec.message()));
        }
    }
}

}  // namespace

void for_each_record(const std::filesystem::path& path,
                     const std::function<void(std::size_t, const json&)>& fn) {
    std::ifstream in(path);
    if (!in) {
        throw Error(fmt::format("cannot open {}", path.string()));
    }
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (is_blank(line)) continue;
        json record;
        try {
            record = json::parse(line);
        } catch (const json::parse_error& e) {
            throw LoadError(fmt::format("{}:{}: malformed record: {}", path.string(), line_no, e.what()),
                            line_no);
        }
        if (!record.is_object()) {
            throw LoadError(fmt::format("{}:{}: malformed record: expected an object", path.string(),
                                        line_no),
                            line_no);
        }
        fn(line_no, record);
    }
    if (in.bad()) {
        throw Error(fmt::format("read error on {}", path.string()));
    }
}

void write_records(const std::filesystem::path& path, std::span<const json> records) {
    std::ostringstream out;
    for (const auto& r : records) {
        out << r.dump() << '\n';
    }
    write_text_file(path, out.str());
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(fmt::format("cannot open {}", path.string()));
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
    ensure_parent(path);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error(fmt::format("cannot write {}", path.string()));
    }
    out << content;
    if (!out) {
        throw Error(fmt::format("write failed on {}", path.string()));
    }
}

}  // namespace wbrag
