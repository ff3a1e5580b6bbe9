#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <filesystem>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace proxdebias {

/// Row-major so that each word vector is contiguous.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// Ordered, duplicate-free token list with a token -> position index.
class Vocabulary {
 public:
  Vocabulary() = default;

  /// Throws std::invalid_argument on duplicate, empty or whitespace-bearing tokens.
  explicit Vocabulary(std::vector<std::string> words);

  std::size_t size() const noexcept { return words_.size(); }
  bool empty() const noexcept { return words_.empty(); }

  const std::string& word(std::size_t i) const { return words_.at(i); }
  const std::vector<std::string>& words() const noexcept { return words_; }

  std::optional<std::size_t> find(std::string_view token) const;
  bool contains(std::string_view token) const { return find(token).has_value(); }

  /// Throws MissingTokenError when absent.
  std::size_t index_of(std::string_view token) const;

 private:
  struct Hash {
    using is_transparent = void;
    std::size_t operator()(std::string_view s) const noexcept {
      return std::hash<std::string_view>{}(s);
    }
  };

  std::vector<std::string> words_;
  std::unordered_map<std::string, std::size_t, Hash, std::equal_to<>> index_;
};

/// Vocabulary plus one dense row per word. Immutable once constructed.
class EmbeddingSet {
 public:
  EmbeddingSet() = default;

  /// Throws std::invalid_argument when the row count does not match the
  /// vocabulary, the dimension is zero, or any component is non-finite.
  EmbeddingSet(Vocabulary vocab, Matrix vectors);

  const Vocabulary& vocab() const noexcept { return vocab_; }
  const Matrix& vectors() const noexcept { return vectors_; }
  std::size_t size() const noexcept { return vocab_.size(); }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(vectors_.cols()); }
  bool empty() const noexcept { return vocab_.empty(); }

  auto row(std::size_t i) const { return vectors_.row(static_cast<Eigen::Index>(i)); }

  /// Copy of the vector for `token`; throws MissingTokenError.
  Vector vector(std::string_view token) const;

 private:
  Vocabulary vocab_;
  Matrix vectors_;
};

struct LoadResult {
  EmbeddingSet set;
  std::size_t duplicate_count = 0;  ///< lines dropped because the token was already seen
};

/// Reads `token c1 ... ch` lines. Blank lines are ignored. When
/// `expected_dim` is absent, the first line fixes the dimension.
/// Throws ParseError (with the 1-based line) on malformed input.
LoadResult load_embedding(std::istream& in, std::optional<std::size_t> expected_dim = std::nullopt,
                          const std::string& source_name = "<stream>");
LoadResult load_embedding_file(const std::filesystem::path& path,
                               std::optional<std::size_t> expected_dim = std::nullopt);

/// Writes one line per word with `precision` digits after the decimal point.
/// Throws std::invalid_argument for an empty set and IoError on write failure.
void save_embedding(const EmbeddingSet& set, std::ostream& out, int precision = 6);
void save_embedding_file(const EmbeddingSet& set, const std::filesystem::path& path,
                         int precision = 6);

/// Scales every row to unit Euclidean norm. Throws std::invalid_argument
/// naming the first zero-norm token.
EmbeddingSet unit_normalize(const EmbeddingSet& set);

}  // namespace proxdebias
