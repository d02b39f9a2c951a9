#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "bgan/image_stack.hpp"

namespace bgan {

// On-disk layout ("BGIS" v1, all integers little-endian):
//   magic "BGIS" | u32 version | u32 count | u32 height | u32 width
//   count*height*width f32 pixels, image-major, row-major
//   u8 has_labels | [count i32 labels]
inline constexpr char kStackMagic[4] = {'B', 'G', 'I', 'S'};
inline constexpr std::uint32_t kStackVersion = 1;
inline constexpr std::size_t kStackHeaderBytes = 20;

std::vector<std::uint8_t> encode_stack(const ImageStack& stack);
ImageStack decode_stack(const std::vector<std::uint8_t>& bytes);

/// Writes `path` and the provenance sidecar `<path>.json`.
void write_stack(const ImageStack& stack, const std::filesystem::path& path);

/// Reads `path`; the sidecar is optional and restores provenance when present.
ImageStack read_stack(const std::filesystem::path& path);

std::filesystem::path sidecar_path(const std::filesystem::path& path);

nlohmann::json provenance_to_json(const StackProvenance& p);
StackProvenance provenance_from_json(const nlohmann::json& j);

// Byte helpers shared with the checkpoint writer.
std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace bgan
