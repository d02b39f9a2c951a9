#include "bgan/stack_io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "bgan/errors.hpp"

namespace bgan {

const char* to_string(IoErrc code) noexcept {
    switch (code) {
        case IoErrc::open_failed: return "open failed";
        case IoErrc::write_failed: return "write failed";
        case IoErrc::bad_magic: return "bad magic";
        case IoErrc::version_mismatch: return "version mismatch";
        case IoErrc::truncated: return "truncated payload";
        case IoErrc::non_finite: return "non-finite pixel";
        case IoErrc::out_of_range: return "pixel out of range";
        case IoErrc::hash_mismatch: return "hash mismatch";
        case IoErrc::malformed: return "malformed";
    }
    return "unknown";
}

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int s = 0; s < 32; s += 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}

std::uint32_t get_u32(const std::uint8_t* p) {
    return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 |
           std::uint32_t(p[3]) << 24;
}

}  // namespace

std::vector<std::uint8_t> encode_stack(const ImageStack& stack) {
    for (std::size_t k = 0; k < stack.pixels().size(); ++k) {
        const float p = stack.pixels()[k];
        if (!std::isfinite(p))
            throw IoError(IoErrc::non_finite, "pixel " + std::to_string(k) + " is not finite");
        if (p < 0.0f || p > 1.0f)
            throw IoError(IoErrc::out_of_range,
                          "pixel " + std::to_string(k) + " = " + std::to_string(p) + " outside [0,1]");
    }
    std::vector<std::uint8_t> out;
    out.reserve(kStackHeaderBytes + 4 * stack.pixels().size() + 1 + 4 * stack.count());
    out.insert(out.end(), std::begin(kStackMagic), std::end(kStackMagic));
    put_u32(out, kStackVersion);
    put_u32(out, static_cast<std::uint32_t>(stack.count()));
    put_u32(out, static_cast<std::uint32_t>(stack.height()));
    put_u32(out, static_cast<std::uint32_t>(stack.width()));
    for (float p : stack.pixels()) put_u32(out, std::bit_cast<std::uint32_t>(p));
    const auto& labels = stack.labels();
    out.push_back(labels ? 1 : 0);
    if (labels)
        for (auto l : *labels) put_u32(out, static_cast<std::uint32_t>(l));
    return out;
}

ImageStack decode_stack(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kStackMagic, 4) != 0)
        throw IoError(IoErrc::bad_magic, "file does not start with BGIS");
    if (bytes.size() < kStackHeaderBytes) throw IoError(IoErrc::truncated, "header is incomplete");
    const auto version = get_u32(bytes.data() + 4);
    if (version != kStackVersion)
        throw IoError(IoErrc::version_mismatch, "version " + std::to_string(version) +
                                                    ", expected " + std::to_string(kStackVersion));
    const std::size_t count = get_u32(bytes.data() + 8);
    const std::size_t height = get_u32(bytes.data() + 12);
    const std::size_t width = get_u32(bytes.data() + 16);
    if (height == 0 || width == 0) throw IoError(IoErrc::malformed, "zero image dimension");
    const std::size_t n = count * height * width;
    const std::size_t need = kStackHeaderBytes + 4 * n + 1;
    if (bytes.size() < need)
        throw IoError(IoErrc::truncated, "expected at least " + std::to_string(need) +
                                             " bytes, found " + std::to_string(bytes.size()));
    std::vector<float> px(n);
    const std::uint8_t* p = bytes.data() + kStackHeaderBytes;
    for (std::size_t k = 0; k < n; ++k, p += 4) {
        px[k] = std::bit_cast<float>(get_u32(p));
        if (!std::isfinite(px[k]))
            throw IoError(IoErrc::non_finite, "pixel " + std::to_string(k) + " is NaN or Inf");
        if (px[k] < 0.0f || px[k] > 1.0f)
            throw IoError(IoErrc::out_of_range, "pixel " + std::to_string(k) + " outside [0,1]");
    }
    const std::uint8_t flag = *p++;
    std::optional<std::vector<std::int32_t>> labels;
    std::size_t expected_size = need;
    if (flag == 1) {
        expected_size += 4 * count;
        if (bytes.size() < expected_size) throw IoError(IoErrc::truncated, "label block is incomplete");
        labels.emplace(count);
        for (std::size_t i = 0; i < count; ++i, p += 4)
            (*labels)[i] = static_cast<std::int32_t>(get_u32(p));
    } else if (flag != 0) {
        throw IoError(IoErrc::malformed, "label presence flag must be 0 or 1");
    }
    if (bytes.size() != expected_size) throw IoError(IoErrc::malformed, "trailing bytes after payload");
    if (count == 0) {
        ImageStack empty(0, height, width);
        empty.set_labels(std::move(labels));
        return empty;
    }
    return ImageStack(height, width, std::move(px), std::move(labels));
}

std::filesystem::path sidecar_path(const std::filesystem::path& path) {
    auto s = path;
    s += ".json";
    return s;
}

nlohmann::json provenance_to_json(const StackProvenance& p) {
    nlohmann::json j;
    j["source"] = p.source;
    j["normalization"] = {{"min", p.normalization.min}, {"max", p.normalization.max}};
    if (p.snr) j["snr"] = *p.snr;
    if (p.labels_meaning) j["labels_meaning"] = *p.labels_meaning;
    for (const auto& [k, v] : p.extra.items()) j[k] = v;
    return j;
}

StackProvenance provenance_from_json(const nlohmann::json& j) {
    StackProvenance p;
    try {
        p.source = j.value("source", std::string("unknown"));
        if (j.contains("normalization")) {
            p.normalization.min = j.at("normalization").at("min").get<double>();
            p.normalization.max = j.at("normalization").at("max").get<double>();
        }
        if (j.contains("snr") && j.at("snr").is_number()) p.snr = j.at("snr").get<double>();
        if (j.contains("labels_meaning")) p.labels_meaning = j.at("labels_meaning").get<std::string>();
        for (const auto& [k, v] : j.items())
            if (k != "source" && k != "normalization" && k != "snr" && k != "labels_meaning")
                p.extra[k] = v;
    } catch (const nlohmann::json::exception& e) {
        throw IoError(IoErrc::malformed, std::string("sidecar: ") + e.what());
    }
    return p;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(IoErrc::open_failed, path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(IoErrc::open_failed, path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError(IoErrc::write_failed, path.string());
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError(IoErrc::open_failed, path.string());
    out << text;
    if (!out) throw IoError(IoErrc::write_failed, path.string());
}

void write_stack(const ImageStack& stack, const std::filesystem::path& path) {
    write_file_bytes(path, encode_stack(stack));
    write_text_file(sidecar_path(path), provenance_to_json(stack.provenance()).dump(2) + "\n");
}

ImageStack read_stack(const std::filesystem::path& path) {
    auto stack = decode_stack(read_file_bytes(path));
    const auto side = sidecar_path(path);
    if (std::filesystem::exists(side)) {
        const auto text = read_file_bytes(side);
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(text.begin(), text.end());
        } catch (const nlohmann::json::exception& e) {
            throw IoError(IoErrc::malformed, side.string() + ": " + e.what());
        }
        stack.provenance() = provenance_from_json(j);
    }
    return stack;
}

}  // namespace bgan
