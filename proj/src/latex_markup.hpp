#pragma once

// Internal helpers shared by the block parser and the markup renderer.

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

namespace scimine::latex {

enum class MathMode {
  Verbatim,  // inline math kept as its source span, whitespace removed
  Flatten,   // math markup dropped, sub/superscripts joined to adjacent text
};

std::string render_markup(std::string_view src, MathMode mode);

inline bool is_letter(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }

/// Index of the '}' matching the '{' at `open`, or npos when unbalanced.
size_t match_brace(std::string_view s, size_t open);
/// Index of the ']' matching the '[' at `open` (brace-aware), or npos.
size_t match_bracket(std::string_view s, size_t open);

size_t skip_spaces(std::string_view s, size_t i);

/// Reads `\name` (letters, optional trailing '*') starting at a backslash.
/// Returns the name and sets `end` past it; single-char control sequences
/// yield a one-character name.
std::string_view read_command(std::string_view s, size_t pos, size_t& end);

/// Reads a `{...}` group at `i` (after spaces); advances `i` past it.
std::optional<std::string_view> read_group(std::string_view s, size_t& i);
std::optional<std::string_view> read_optional(std::string_view s, size_t& i);

/// Finds the unescaped closing `$` for inline math opened at `open`.
size_t find_math_close(std::string_view s, size_t open, std::string_view closer);

std::string strip_comments(std::string_view src);

}  // namespace scimine::latex
