#include "lima/cli.hpp"

#include "lima/error.hpp"
#include "lima/io.hpp"

#include <openssl/evp.h>

#include <array>
#include <cstdio>
#include <memory>

namespace lima::cli {

std::string sha256_hex(const std::string& bytes) {
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
    std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
    unsigned int len = 0;
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
        EVP_DigestFinal_ex(ctx.get(), digest.data(), &len) != 1)
        throw std::runtime_error("SHA-256 computation failed");
    std::string hex;
    hex.reserve(2 * len);
    for (unsigned int k = 0; k < len; ++k) {
        char buf[3];
        std::snprintf(buf, sizeof buf, "%02x", digest[k]);
        hex += buf;
    }
    return hex;
}

std::string sha256_file(const fs::path& path) { return sha256_hex(io::read_text(path)); }

nlohmann::ordered_json to_json(const RunManifest& m) {
    nlohmann::ordered_json j;
    j["command"] = m.command;
    j["version"] = m.version;
    j["seed"] = m.seed;
    j["args"] = m.args;
    nlohmann::ordered_json inputs = nlohmann::ordered_json::object();
    for (const auto& [path, digest] : m.inputs) inputs[path] = {{"sha256", digest}};
    j["inputs"] = inputs;
    return j;
}

RunManifest manifest_from_json(const nlohmann::ordered_json& j) {
    RunManifest m;
    try {
        m.command = j.at("command").get<std::string>();
        m.version = j.at("version").get<std::string>();
        m.seed = j.at("seed").get<std::uint64_t>();
        m.args = j.at("args");
        for (const auto& [path, v] : j.at("inputs").items()) m.inputs[path] = v.at("sha256").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("malformed manifest: ") + e.what());
    }
    return m;
}

void write_manifest(const fs::path& dir, const RunManifest& m) { io::write_json(dir / "manifest.json", to_json(m)); }

RunManifest read_manifest(const fs::path& path) {
    nlohmann::ordered_json j;
    try {
        j = nlohmann::ordered_json::parse(io::read_text(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw InputError(path.string() + ": " + e.what());
    }
    return manifest_from_json(j);
}

} // namespace lima::cli
