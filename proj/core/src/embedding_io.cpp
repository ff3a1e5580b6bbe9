#include "proxdebias/embedding_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "proxdebias/errors.hpp"
#include "proxdebias/text_util.hpp"

namespace proxdebias {

namespace {

bool has_whitespace(std::string_view token) {
  return token.find_first_of(" \t\r\n\v\f") != std::string_view::npos;
}

}  // namespace

Vocabulary::Vocabulary(std::vector<std::string> words) : words_(std::move(words)) {
  index_.reserve(words_.size());
  for (std::size_t i = 0; i < words_.size(); ++i) {
    const std::string& w = words_[i];
    if (w.empty()) throw std::invalid_argument("vocabulary token at position " + std::to_string(i) + " is empty");
    if (has_whitespace(w)) throw std::invalid_argument("vocabulary token contains whitespace: '" + w + "'");
    if (!index_.emplace(w, i).second) throw std::invalid_argument("duplicate vocabulary token: '" + w + "'");
  }
}

std::optional<std::size_t> Vocabulary::find(std::string_view token) const {
  const auto it = index_.find(token);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t Vocabulary::index_of(std::string_view token) const {
  const auto it = index_.find(token);
  if (it == index_.end()) throw MissingTokenError(std::string(token));
  return it->second;
}

EmbeddingSet::EmbeddingSet(Vocabulary vocab, Matrix vectors)
    : vocab_(std::move(vocab)), vectors_(std::move(vectors)) {
  if (static_cast<std::size_t>(vectors_.rows()) != vocab_.size()) {
    throw std::invalid_argument("embedding has " + std::to_string(vectors_.rows()) + " rows for " +
                                std::to_string(vocab_.size()) + " tokens");
  }
  if (vectors_.cols() == 0) throw std::invalid_argument("embedding dimension must be positive");
  if (!vectors_.allFinite()) {
    for (Eigen::Index r = 0; r < vectors_.rows(); ++r) {
      if (!vectors_.row(r).allFinite()) {
        throw std::invalid_argument("non-finite component in vector for '" + vocab_.word(r) + "'");
      }
    }
  }
}

Vector EmbeddingSet::vector(std::string_view token) const {
  return vectors_.row(static_cast<Eigen::Index>(vocab_.index_of(token))).transpose();
}

LoadResult load_embedding(std::istream& in, std::optional<std::size_t> expected_dim,
                          const std::string& source_name) {
  if (expected_dim && *expected_dim == 0) throw std::invalid_argument("expected_dim must be positive");

  std::vector<std::string> words;
  std::vector<double> values;
  std::unordered_map<std::string, std::size_t> seen;
  std::optional<std::size_t> dim = expected_dim;
  std::size_t duplicates = 0;

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto fields = text::split_whitespace(line);
    if (fields.empty()) continue;
    if (fields.size() < 2) throw ParseError(source_name, line_no, "expected a token followed by components");

    const std::size_t n = fields.size() - 1;
    if (!dim) dim = n;
    if (n != *dim) {
      throw ParseError(source_name, line_no,
                       "expected " + std::to_string(*dim) + " components, found " + std::to_string(n));
    }

    std::string token(fields[0]);
    if (seen.contains(token)) {
      ++duplicates;
      continue;
    }

    const std::size_t offset = values.size();
    values.resize(offset + n);
    for (std::size_t j = 0; j < n; ++j) {
      double v = 0.0;
      if (!text::parse_double(fields[j + 1], v) || !std::isfinite(v)) {
        throw ParseError(source_name, line_no, "unparsable component '" + std::string(fields[j + 1]) + "'");
      }
      values[offset + j] = v;
    }
    seen.emplace(token, words.size());
    words.push_back(std::move(token));
  }
  if (in.bad()) throw IoError("read failure on " + source_name);
  if (words.empty()) throw ParseError(source_name, 0, "no embedding vectors found");

  Matrix m = Eigen::Map<Matrix>(values.data(), static_cast<Eigen::Index>(words.size()),
                                static_cast<Eigen::Index>(*dim));
  return {EmbeddingSet(Vocabulary(std::move(words)), std::move(m)), duplicates};
}

LoadResult load_embedding_file(const std::filesystem::path& path, std::optional<std::size_t> expected_dim) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open embedding file: " + path.string());
  return load_embedding(in, expected_dim, path.string());
}

void save_embedding(const EmbeddingSet& set, std::ostream& out, int precision) {
  if (set.empty()) throw std::invalid_argument("cannot save an empty embedding set");
  if (precision < 0 || precision > 17) throw std::invalid_argument("precision must be within [0, 17]");

  std::string line;
  char buf[64];
  const Matrix& m = set.vectors();
  for (std::size_t i = 0; i < set.size(); ++i) {
    line.assign(set.vocab().word(i));
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      const auto res = std::to_chars(buf, buf + sizeof buf, m(static_cast<Eigen::Index>(i), j),
                                     std::chars_format::fixed, precision);
      line.push_back(' ');
      line.append(buf, res.ptr);
    }
    line.push_back('\n');
    out.write(line.data(), static_cast<std::streamsize>(line.size()));
    if (!out) throw IoError("write failure while saving embedding");
  }
  out.flush();
  if (!out) throw IoError("write failure while saving embedding");
}

void save_embedding_file(const EmbeddingSet& set, const std::filesystem::path& path, int precision) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  save_embedding(set, out, precision);
}

EmbeddingSet unit_normalize(const EmbeddingSet& set) {
  Matrix m = set.vectors();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    const double norm = m.row(r).norm();
    if (norm == 0.0) {
      throw std::invalid_argument("cannot normalize zero vector for '" + set.vocab().word(r) + "'");
    }
    m.row(r) /= norm;
  }
  return EmbeddingSet(set.vocab(), std::move(m));
}

}  // namespace proxdebias
