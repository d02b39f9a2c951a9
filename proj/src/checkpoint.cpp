#include "bgan/checkpoint.hpp"

#include <openssl/evp.h>

#include <array>
#include <chrono>
#include <cstring>
#include <ctime>
#include <memory>

#include "bgan/errors.hpp"
#include "bgan/stack_io.hpp"

namespace bgan {

namespace {

constexpr char kMagic[4] = {'B', 'G', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

std::array<std::uint8_t, 32> sha256(std::span<const std::uint8_t> bytes) {
    std::array<std::uint8_t, 32> digest{};
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
    unsigned int len = 0;
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
        EVP_DigestFinal_ex(ctx.get(), digest.data(), &len) != 1)
        throw std::runtime_error("sha256 failed");
    return digest;
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int s = 0; s < 64; s += 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}

std::uint64_t get_u64(const std::uint8_t* p) {
    std::uint64_t v = 0;
    for (int k = 7; k >= 0; --k) v = (v << 8) | p[k];
    return v;
}

}  // namespace

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out;
    for (auto b : sha256(bytes)) {
        out.push_back(digits[b >> 4]);
        out.push_back(digits[b & 15]);
    }
    return out;
}

std::string sha256_hex(const std::string& text) {
    return sha256_hex(std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string file_sha256(const std::filesystem::path& path) { return sha256_hex(read_file_bytes(path)); }

nlohmann::json RunManifest::to_json() const {
    return {{"run_id", run_id},
            {"config", config},
            {"seed", seed},
            {"created_at", created_at},
            {"data_fingerprints", data_fingerprints}};
}

RunManifest RunManifest::from_json(const nlohmann::json& j) {
    RunManifest m;
    try {
        m.run_id = j.at("run_id").get<std::string>();
        m.config = j.at("config");
        m.seed = j.at("seed").get<std::uint64_t>();
        m.created_at = j.at("created_at").get<std::string>();
        m.data_fingerprints = j.at("data_fingerprints").get<std::map<std::string, std::string>>();
    } catch (const nlohmann::json::exception& e) {
        throw IoError(IoErrc::malformed, std::string("manifest: ") + e.what());
    }
    return m;
}

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &tm);
    return buf;
}

void save_checkpoint(std::span<const std::uint8_t> blob, const RunManifest& manifest,
                     const std::filesystem::path& path) {
    const std::string mj = manifest.to_json().dump();
    std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
    for (int s = 0; s < 32; s += 8) out.push_back(static_cast<std::uint8_t>(kVersion >> s));
    put_u64(out, mj.size());
    out.insert(out.end(), mj.begin(), mj.end());
    put_u64(out, blob.size());
    out.insert(out.end(), blob.begin(), blob.end());
    const auto digest = sha256(out);
    out.insert(out.end(), digest.begin(), digest.end());
    write_file_bytes(path, out);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    const auto bytes = read_file_bytes(path);
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0)
        throw IoError(IoErrc::bad_magic, path.string() + " is not a checkpoint");
    if (bytes.size() < 4 + 4 + 8 + 8 + 32) throw IoError(IoErrc::truncated, path.string());
    const std::size_t body = bytes.size() - 32;
    const auto digest = sha256(std::span(bytes.data(), body));
    if (std::memcmp(digest.data(), bytes.data() + body, 32) != 0)
        throw IoError(IoErrc::hash_mismatch, path.string() + " content hash does not match");

    const std::uint8_t* p = bytes.data() + 4;
    const std::uint32_t version = p[0] | p[1] << 8 | p[2] << 16 | std::uint32_t(p[3]) << 24;
    if (version != kVersion) throw IoError(IoErrc::version_mismatch, path.string());
    p += 4;
    const auto end = bytes.data() + body;
    const auto mlen = get_u64(p);
    p += 8;
    if (mlen > static_cast<std::uint64_t>(end - p) - 8) throw IoError(IoErrc::truncated, "manifest");
    Checkpoint ck;
    nlohmann::json mj;
    try {
        mj = nlohmann::json::parse(p, p + mlen);
    } catch (const nlohmann::json::exception& e) {
        throw IoError(IoErrc::malformed, std::string("manifest json: ") + e.what());
    }
    ck.manifest = RunManifest::from_json(mj);
    p += mlen;
    const auto blen = get_u64(p);
    p += 8;
    if (blen != static_cast<std::uint64_t>(end - p)) throw IoError(IoErrc::truncated, "blob");
    ck.blob.assign(p, end);
    return ck;
}

}  // namespace bgan
