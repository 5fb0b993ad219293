#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace gola {

// Whole-file read; throws IoError when the file cannot be opened.
std::string read_file(const std::filesystem::path& path);

// Writes `contents` to a temporary sibling, then renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view data);

}  // namespace gola
