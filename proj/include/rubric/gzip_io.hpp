#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace rubric::io {

/// True when the buffer starts with the gzip magic bytes 0x1f 0x8b.
bool is_gzip(std::string_view bytes) noexcept;

std::string gzip_compress(std::string_view plain);
std::string gzip_decompress(std::string_view compressed);

/// Reads a whole file, transparently inflating gzip content.
std::string read_text_file(const std::filesystem::path& path);

/// Writes via a sibling temp file followed by rename, so readers never see a
/// partially written file. Compresses when `compress` is set.
void write_file_atomic(const std::filesystem::path& path, std::string_view content,
                       bool compress = false);

/// Compression default for an output path: true for a ".gz" suffix.
bool wants_gzip(const std::filesystem::path& path);

}  // namespace rubric::io
