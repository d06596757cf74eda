#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace hardid {

std::string readTextFile(const std::filesystem::path& path);

/// Writes to a sibling temporary file and renames it over `path`, so readers
/// never observe a partially written file.
void writeFileAtomic(const std::filesystem::path& path, std::string_view content);

/// Lower-case hex SHA-256 of the bytes.
std::string sha256Hex(std::string_view bytes);

std::string sha256OfFile(const std::filesystem::path& path);

}  // namespace hardid
