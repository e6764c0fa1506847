#pragma once

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace attenmfg {

std::string sha256_hex(std::string_view bytes);

// Bytes that identify an artifact's content, with wall-time fields blanked:
// CSV columns named `seconds` or ending in `_ms`, and the `ms` key of oracle
// JSON results. Everything else is hashed verbatim.
std::string stable_artifact_bytes(const std::filesystem::path& path);

struct Artifact {
    std::string path;    // relative to the run's output directory, or as given for inputs
    std::string sha256;  // of stable_artifact_bytes
};

// Written as `manifest.json` next to the files a command produced.
struct RunManifest {
    std::string command;
    nlohmann::ordered_json config = nlohmann::ordered_json::object();
    nlohmann::ordered_json seeds = nlohmann::ordered_json::object();
    std::vector<Artifact> inputs;
    std::vector<Artifact> outputs;
    nlohmann::ordered_json wall_times = nlohmann::ordered_json::object();  // seconds

    // SHA-256 over everything except wall times and input/output paths.
    std::string content_hash() const;

    void add_output(const std::filesystem::path& out_dir, const std::filesystem::path& file);
    void add_input(const std::filesystem::path& file);

    nlohmann::ordered_json to_json() const;
    static RunManifest from_json(const nlohmann::json& j);

    void write(const std::filesystem::path& out_dir) const;
    static RunManifest read(const std::filesystem::path& manifest_path);
};

inline constexpr std::string_view kManifestName = "manifest.json";

}  // namespace attenmfg
