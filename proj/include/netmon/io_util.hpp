#pragma once

#include <filesystem>
#include <string>

namespace netmon {

// Writes content to a temp file in the target directory and renames it over
// the destination, so readers never observe a torn file.
void atomic_write_file(const std::filesystem::path& path, const std::string& content);

// Appends lines to a file, creating parent directories on demand.
void append_to_file(const std::filesystem::path& path, const std::string& content);

}  // namespace netmon
