#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace mitosyn {

// Writes to a sibling temp file, then renames over the target.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);
std::string read_file(const std::filesystem::path& path);

// FNV-1a, 64-bit. Used for config fingerprints and id-log digests.
std::uint64_t fnv1a64(std::string_view data);
std::string hex64(std::uint64_t value);

// Minimal CSV field splitting: comma separated, no quoting (ids, paths and
// domain tags in manifests never contain commas).
std::vector<std::string> split_csv_line(const std::string& line);

}  // namespace mitosyn
