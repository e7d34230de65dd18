#pragma once

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "tvcast/common.hpp"
#include "tvcast/version.hpp"

namespace tvcast {

// FNV-1a 64-bit over the file bytes, rendered as 16 hex digits. Detects
// accidental corruption of run outputs; not a cryptographic digest.
inline std::string file_digest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open file for digest: " + path);
    std::uint64_t hash = 0xCBF29CE484222325ULL;
    char buf[1 << 16];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        const std::streamsize n = in.gcount();
        for (std::streamsize i = 0; i < n; ++i) {
            hash ^= static_cast<unsigned char>(buf[i]);
            hash *= 0x100000001B3ULL;
        }
        if (!in) break;
    }
    char hex[17];
    std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(hash));
    return hex;
}

// Every CLI command writes one of these, last, so a run directory is
// self-describing. Timestamps and timings are informational and excluded
// from any digest or reproducibility comparison.
struct RunManifest {
    std::string command;
    nlohmann::json config;
    std::uint64_t seed = 0;
    std::vector<std::pair<std::string, std::string>> inputs;   // path, digest
    std::vector<std::pair<std::string, std::string>> outputs;  // path, digest
    double timing_ms = 0.0;

    void add_input(const std::string& path) { inputs.emplace_back(path, file_digest(path)); }
    void add_output(const std::string& path) { outputs.emplace_back(path, file_digest(path)); }

    nlohmann::json to_json() const {
        const auto now = std::chrono::system_clock::now();
        const std::time_t tt = std::chrono::system_clock::to_time_t(now);
        char stamp[32];
        std::strftime(stamp, sizeof(stamp), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&tt));
        nlohmann::json files_in = nlohmann::json::array();
        for (const auto& [path, digest] : inputs)
            files_in.push_back({{"path", path}, {"digest", digest}});
        nlohmann::json files_out = nlohmann::json::array();
        for (const auto& [path, digest] : outputs)
            files_out.push_back({{"path", path}, {"digest", digest}});
        return nlohmann::json{{"command", command}, {"version", kVersion},
                              {"timestamp", stamp}, {"seed", seed},
                              {"config", config},   {"inputs", files_in},
                              {"outputs", files_out}, {"timing_ms", timing_ms}};
    }

    void write(const std::string& path) const {
        std::ofstream out(path);
        if (!out) throw DataError("cannot write manifest: " + path);
        out << to_json().dump(2) << '\n';
    }
};

}  // namespace tvcast
