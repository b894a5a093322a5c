#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace lur::io {

std::string read_text(const std::filesystem::path &path);
void write_text(const std::filesystem::path &path, const std::string &text);

/// RFC 4180-style CSV (quoted fields, embedded commas). One vector per line.
std::vector<std::vector<std::string>> parse_csv(const std::string &text);
std::vector<std::vector<std::string>> read_csv(const std::filesystem::path &path);

/// Quotes a field if it contains a comma, quote or newline.
std::string csv_field(std::string_view s);

std::optional<double> parse_double(std::string_view s);
std::optional<int> parse_int(std::string_view s);

/// Shortest decimal representation that parses back to the same double.
std::string format_double(double v);

/// Lower-case hex SHA-256.
std::string sha256_hex(std::string_view data);
std::string sha256_file(const std::filesystem::path &path);

} // namespace lur::io
