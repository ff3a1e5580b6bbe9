#pragma once

#include <filesystem>
#include <istream>
#include <string>
#include <string_view>
#include <vector>

namespace proxdebias::text {

/// ASCII lowercase; bytes >= 0x80 are left untouched so UTF-8 survives.
std::string to_lower(std::string_view s);

std::string_view trim(std::string_view s);

/// Splits on runs of spaces and tabs. Empty fields are dropped.
std::vector<std::string_view> split_whitespace(std::string_view line);

std::vector<std::string_view> split(std::string_view s, char sep);

/// Strict decimal parse of the whole field; rejects trailing garbage.
bool parse_double(std::string_view field, double& out);

/// One token per line; blank lines and lines starting with '#' are skipped.
/// Tokens are lowercased when `lowercase` is set.
std::vector<std::string> read_word_list(std::istream& in, bool lowercase = true);
std::vector<std::string> read_word_list_file(const std::filesystem::path& path,
                                             bool lowercase = true);

}  // namespace proxdebias::text
