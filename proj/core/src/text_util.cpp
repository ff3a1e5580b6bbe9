#include "proxdebias/text_util.hpp"

#include <charconv>
#include <cmath>
#include <fstream>

#include "proxdebias/errors.hpp"

namespace proxdebias {

ParseError::ParseError(const std::string& source, std::size_t line, const std::string& message)
    : std::runtime_error(line == 0 ? source + ": " + message
                                   : source + ":" + std::to_string(line) + ": " + message),
      line_(line) {}

MissingTokenError::MissingTokenError(const std::string& token)
    : std::invalid_argument("token not in vocabulary: '" + token + "'"), token_(token) {}

namespace text {

std::string to_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

std::string_view trim(std::string_view s) {
  constexpr std::string_view ws = " \t\r\n";
  const auto begin = s.find_first_not_of(ws);
  if (begin == std::string_view::npos) return {};
  const auto end = s.find_last_not_of(ws);
  return s.substr(begin, end - begin + 1);
}

std::vector<std::string_view> split_whitespace(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
    if (i > start) fields.push_back(line.substr(start, i - start));
  }
  return fields;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      parts.push_back(s.substr(start));
      return parts;
    }
    parts.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

bool parse_double(std::string_view field, double& out) {
  if (field.empty()) return false;
  // from_chars rejects a leading '+', which some writers emit.
  if (field.front() == '+') field.remove_prefix(1);
  const char* first = field.data();
  const char* last = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc{} && ptr == last;
}

std::vector<std::string> read_word_list(std::istream& in, bool lowercase) {
  std::vector<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    const auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    words.emplace_back(lowercase ? to_lower(t) : std::string(t));
  }
  return words;
}

std::vector<std::string> read_word_list_file(const std::filesystem::path& path, bool lowercase) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open word list: " + path.string());
  return read_word_list(in, lowercase);
}

}  // namespace text
}  // namespace proxdebias
