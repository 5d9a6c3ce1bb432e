#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace scimine::text {

std::string to_lower(std::string_view s);
std::string_view trim(std::string_view s);
bool is_space(char c);

/// Splits on runs of ASCII whitespace; never yields empty pieces.
std::vector<std::string> split_ws(std::string_view s);

std::string join(const std::vector<std::string>& words, std::string_view sep = " ");

/// Collapses whitespace runs to one space and trims both ends.
std::string collapse_ws(std::string_view s);

/// Removes ASCII control characters (including tabs and newlines).
std::string strip_control(std::string_view s);

bool starts_with_upper(std::string_view s);

std::string read_file(const std::string& path);
/// Writes via a temporary sibling and rename, so readers never observe a torn file.
void write_file_atomic(const std::string& path, std::string_view content);

std::string sha256_hex(std::string_view data);

}  // namespace scimine::text
