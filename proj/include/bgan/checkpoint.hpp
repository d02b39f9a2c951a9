#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace bgan {

/// Hex SHA-256 of a byte buffer.
std::string sha256_hex(std::span<const std::uint8_t> bytes);
std::string sha256_hex(const std::string& text);
/// Hex SHA-256 of a file's contents.
std::string file_sha256(const std::filesystem::path& path);

struct RunManifest {
    std::string run_id;
    nlohmann::json config = nlohmann::json::object();
    std::uint64_t seed = 0;
    std::string created_at;
    std::map<std::string, std::string> data_fingerprints;

    nlohmann::json to_json() const;
    static RunManifest from_json(const nlohmann::json& j);
};

/// UTC timestamp "YYYYmmddTHHMMSSZ".
std::string utc_timestamp();

struct Checkpoint {
    std::vector<std::uint8_t> blob;
    RunManifest manifest;
};

// Layout: "BGCK" | u32 version | u64 manifest bytes | manifest JSON | u64 blob bytes | blob
//         | 32-byte SHA-256 over everything before it.
void save_checkpoint(std::span<const std::uint8_t> blob, const RunManifest& manifest,
                     const std::filesystem::path& path);

/// Throws IoError(hash_mismatch) if any stored byte was altered.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace bgan
