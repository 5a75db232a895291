#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace aniso {

// Writes to "<path>.tmp" then renames over path; creates parent directories.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

[[nodiscard]] std::string read_file(const std::filesystem::path& path);

// "%.17g": 17 significant digits, round-trips doubles exactly.
[[nodiscard]] std::string format_double(double v);

}  // namespace aniso
