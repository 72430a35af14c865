#pragma once

#include <filesystem>
#include <string>

namespace garment {

// Shortest decimal string that parses back to exactly the same double.
std::string format_double(double x);

// Writes via a temp file in the same directory, then renames over the
// destination, so readers never observe a partial file.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

std::string read_file(const std::filesystem::path& path);

}  // namespace garment
