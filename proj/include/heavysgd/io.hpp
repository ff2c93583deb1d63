#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace heavysgd::io {

/// Shortest decimal string that parses back to exactly `x` ("nan", "inf" for non-finite).
std::string format_double(double x);
double parse_double(std::string_view s);

/// Writes to a sibling temp file, flushes, then renames over `path`, so readers
/// never observe a partially written file.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);
std::string read_file(const std::filesystem::path& path);

std::string sha256_hex(std::string_view data);

/// Minimal CSV: comma separated, no quoting (all fields written here are numeric or simple identifiers).
std::vector<std::vector<std::string>> parse_csv(std::string_view text);

}  // namespace heavysgd::io
