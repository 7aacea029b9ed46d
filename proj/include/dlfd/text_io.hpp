#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace dlfd::text {

/// Shortest decimal form that parses back to the identical double.
std::string format_double(double value);

/// Strict parse: the whole token must be consumed. Throws parse errors.
double parse_double(std::string_view token);
std::uint64_t parse_uint(std::string_view token);

std::vector<std::string_view> split(std::string_view line, char delimiter);
std::vector<std::string_view> split_whitespace(std::string_view line);
std::string_view trim(std::string_view s);

std::string read_file(const std::filesystem::path& path);
/// Writes atomically enough for our purposes: truncate and write, throwing io errors.
void write_file(const std::filesystem::path& path, std::string_view content);

/// FNV-1a 64-bit, rendered as 16 hex digits. Used for artifact fingerprints.
std::string fnv1a_hex(std::string_view bytes);

}  // namespace dlfd::text
