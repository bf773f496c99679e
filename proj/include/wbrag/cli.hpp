#pragma once

#include <iosfwd>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "wbrag/backends.hpp"
#include "wbrag/pipeline.hpp"

namespace wbrag {

/// Effective settings of one CLI run. Every field is addressable by a
/// config-file key; see config_keys().
struct RunConfig {
    PipelineConfig pipeline;

    std::string corpus;
    std::string train;
    std::string test;
    std::string index;
    std::string out;
    std::string world;
    std::string wb_dir;
    std::string spec;
    std::string grid;

    std::string generator = "oracle";  // oracle | http
    std::string distiller = "mock";    // mock | http
    std::string embedder = "mock";     // mock | http

    EndpointConfig llm;
    EndpointConfig embedding;
    /// Environment variable holding the bearer token for both endpoints.
    std::string api_key_env = "WBRAG_API_KEY";
};

/// Known keys in echo order.
const std::vector<std::string>& config_keys();

/// False when `key` is unknown. Malformed values raise Error.
bool apply_config_key(RunConfig& cfg, std::string_view key, std::string_view value);

/// "key = value" lines for every key except jobs, which never changes results.
std::string config_echo(const RunConfig& cfg);

std::unique_ptr<Generator> make_generator(const RunConfig& cfg);
std::unique_ptr<Generator> make_distiller(const RunConfig& cfg);
std::unique_ptr<Embedder> make_embedder(const RunConfig& cfg);

/// Entry point behind the wbrag executable. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace wbrag
