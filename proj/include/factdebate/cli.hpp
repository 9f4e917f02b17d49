#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <string>

#include "factdebate/backend.hpp"
#include "factdebate/corpus.hpp"
#include "factdebate/debate.hpp"
#include "factdebate/prompt_template.hpp"
#include "factdebate/taxonomy.hpp"
#include "json.hpp"

namespace factdebate::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitBackend = 3;

struct BackendSpec {
    enum class Kind { scripted, remote };
    Kind kind = Kind::scripted;
    std::filesystem::path rules_path;  // scripted
    std::string base_url;              // remote; empty keeps the default / environment value
    std::string model;
    int timeout_s = 120;
    int max_attempts = 3;
    int max_in_flight = 4;
};

// A run configuration file (JSON). Relative paths resolve against the file's directory.
// Credentials are never part of it: the remote backend reads them from the environment.
struct RunConfig {
    std::optional<std::filesystem::path> taxonomy_path;
    std::optional<std::filesystem::path> templates_dir;
    // corpus_id -> persisted index, or a *.jsonl manifest ingested at load time
    std::map<std::string, std::filesystem::path> corpora;
    corpus::ChunkingParams chunking;
    debate::DebateConfig debate;
    BackendSpec backend;
    std::filesystem::path out_dir = "factdebate-out";
    int jobs = 1;

    static RunConfig from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir);
    static RunConfig load(const std::filesystem::path& path);
};

// Everything a run needs, loaded and validated; no backend call has been made yet.
struct Runtime {
    std::unique_ptr<taxonomy::Taxonomy> taxonomy;
    std::unique_ptr<agents::TemplateSet> templates;
    std::unique_ptr<corpus::IndexRegistry> registry;
    std::unique_ptr<backend::Backend> backend;
};

Runtime load_runtime(const RunConfig& config);

// Claim id used by `check` when none is given.
std::string default_claim_id(std::string_view claim_text);

// Entry point shared by the executable and the tests.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace factdebate::cli
