#include "attenmfg/manifest.hpp"

#include "attenmfg/error.hpp"

#include <openssl/evp.h>

#include <fstream>
#include <sstream>

namespace attenmfg {

namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::string> split(std::string_view line, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(sep, start);
        out.emplace_back(line.substr(start, pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

bool is_timing_column(std::string_view name) {
    return name == "seconds" || (name.size() >= 3 && name.substr(name.size() - 3) == "_ms");
}

std::string stable_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::vector<char> keep;
    std::string out;
    bool header = true;
    while (std::getline(in, line)) {
        auto cells = split(line, ',');
        if (header) {
            for (const auto& c : cells) keep.push_back(!is_timing_column(c));
            header = false;
        }
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i < keep.size() && !keep[i]) cells[i].clear();
            out += cells[i];
            out += i + 1 < cells.size() ? ',' : '\n';
        }
    }
    return out;
}

}  // namespace

std::string sha256_hex(std::string_view bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw Error("SHA-256 computation failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 15]);
    }
    return out;
}

std::string stable_artifact_bytes(const fs::path& path) {
    std::string bytes = read_file(path);
    const auto ext = path.extension().string();
    if (ext == ".csv") return stable_csv(bytes);
    if (ext == ".json" && path.filename().string().find(".oracle") != std::string::npos) {
        auto j = nlohmann::ordered_json::parse(bytes);
        j.erase("ms");
        return j.dump();
    }
    return bytes;
}

std::string RunManifest::content_hash() const {
    nlohmann::ordered_json j;
    j["command"] = command;
    j["config"] = config;
    j["seeds"] = seeds;
    auto hashes = [](const std::vector<Artifact>& as) {
        nlohmann::ordered_json arr = nlohmann::ordered_json::array();
        for (const auto& a : as) arr.push_back(a.sha256);
        return arr;
    };
    j["inputs"] = hashes(inputs);
    j["outputs"] = hashes(outputs);
    return sha256_hex(j.dump());
}

void RunManifest::add_output(const fs::path& out_dir, const fs::path& file) {
    outputs.push_back({fs::relative(file, out_dir).generic_string(),
                       sha256_hex(stable_artifact_bytes(file))});
}

void RunManifest::add_input(const fs::path& file) {
    inputs.push_back({file.generic_string(), sha256_hex(stable_artifact_bytes(file))});
}

nlohmann::ordered_json RunManifest::to_json() const {
    nlohmann::ordered_json j;
    j["command"] = command;
    j["config"] = config;
    j["seeds"] = seeds;
    auto list = [](const std::vector<Artifact>& as) {
        nlohmann::ordered_json arr = nlohmann::ordered_json::array();
        for (const auto& a : as) arr.push_back({{"path", a.path}, {"sha256", a.sha256}});
        return arr;
    };
    j["inputs"] = list(inputs);
    j["outputs"] = list(outputs);
    j["wall_times"] = wall_times;
    j["content_hash"] = content_hash();
    return j;
}

RunManifest RunManifest::from_json(const nlohmann::json& j) {
    RunManifest m;
    try {
        m.command = j.at("command").get<std::string>();
        m.config = nlohmann::ordered_json::parse(j.at("config").dump());
        m.seeds = nlohmann::ordered_json::parse(j.at("seeds").dump());
        for (const auto& a : j.at("inputs"))
            m.inputs.push_back({a.at("path").get<std::string>(), a.at("sha256").get<std::string>()});
        for (const auto& a : j.at("outputs"))
            m.outputs.push_back({a.at("path").get<std::string>(), a.at("sha256").get<std::string>()});
        m.wall_times = nlohmann::ordered_json::parse(j.at("wall_times").dump());
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("manifest", e.what());
    }
    return m;
}

void RunManifest::write(const fs::path& out_dir) const {
    fs::create_directories(out_dir);
    std::ofstream out(out_dir / kManifestName);
    if (!out) throw Error("cannot write manifest in '" + out_dir.string() + "'");
    out << to_json().dump(2) << '\n';
}

RunManifest RunManifest::read(const fs::path& path) {
    try {
        return from_json(nlohmann::json::parse(read_file(path)));
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError("manifest", e.what());
    }
}

}  // namespace attenmfg
