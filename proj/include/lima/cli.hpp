#pragma once

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace lima::cli {

namespace fs = std::filesystem;

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitDegenerate = 3;

/// Everything needed to rerun a command and obtain identical files: the
/// resolved arguments (output directory and thread count excluded) and the
/// SHA-256 of every input file.
struct RunManifest {
    std::string command;
    nlohmann::ordered_json args;
    std::uint64_t seed = 0;
    std::string version;
    std::map<std::string, std::string> inputs;  // path as given -> hex digest
};

[[nodiscard]] std::string sha256_hex(const std::string& bytes);
[[nodiscard]] std::string sha256_file(const fs::path& path);

[[nodiscard]] nlohmann::ordered_json to_json(const RunManifest& m);
[[nodiscard]] RunManifest manifest_from_json(const nlohmann::ordered_json& j);
void write_manifest(const fs::path& dir, const RunManifest& m);
[[nodiscard]] RunManifest read_manifest(const fs::path& path);

/// Runs the resolved command into `out`; returns the exit code. Throws
/// InputError / DegenerateError for the caller to map.
int execute(const std::string& command, const nlohmann::ordered_json& args, const fs::path& out);

/// Full command-line entry point, mapping errors to exit codes.
int run(int argc, char** argv);
int run(const std::vector<std::string>& args);

} // namespace lima::cli
